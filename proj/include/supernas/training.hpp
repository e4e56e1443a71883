// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "supernas/data.hpp"
#include "supernas/supernet.hpp"

namespace supernas {

enum class GradNorm { sum, mean_over_networks };

struct TrainConfig {
    int iterations = 0;
    int warmup_iterations = 0;
    int samples_per_step = 8;  // K in the sampled-distillation loop
    int batch_size = 64;
    double lr_init = 0.01;
    double warmup_lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double alpha = 0.5;  // distillation tradeoff
    GradNorm grad_normalization = GradNorm::mean_over_networks;
    bool augment = true;

    void validate() const;
};

/// Uniform per-layer sampling over the option lists.
class Sampler {
  public:
    Sampler(const SearchSpace& space, uint64_t seed) : space_(&space), rng_(seed) {}

    SubnetEncoding sample();

    const Rng::State& state() const { return rng_.state(); }
    void set_state(const Rng::State& st) { rng_.set_state(st); }

  private:
    const SearchSpace* space_;
    Rng rng_;
};

/// lr_init * 0.5 * (1 + cos(pi * t / T))
double cosine_lr(int t, int total, double lr_init);

/// (1-alpha)*CE(student, labels) + alpha*KL(teacher || student), teacher constant.
double distill_loss_value(const Tensor& student_logits, const Tensor& teacher_logits,
                          const std::vector<int>& labels, double alpha);

/// SGD with momentum. Weight decay applies to conv and linear weights only;
/// batchnorm and PReLU parameters are excluded, as are biases. Velocities
/// persist across steps and serialize into checkpoints.
class SgdOptimizer {
  public:
    SgdOptimizer(SupernetParams& params, double momentum, double weight_decay);

    /// grad_scale rescales accumulated gradients (1/(K+1) for the mean rule).
    /// Non-finite gradients abort with a diagnostic.
    void step(SupernetParams& params, double lr, double grad_scale);

    const std::vector<Tensor>& velocities() const { return velocity_; }
    void set_velocities(std::vector<Tensor> v);

  private:
    double momentum_;
    double weight_decay_;
    std::vector<Tensor> velocity_;
};

struct IterRecord {
    int stage = 0;
    std::string phase;  // "warmup" or "distill"
    int iter = 0;
    double lr = 0.0;
    double loss_largest = 0.0;
    double loss_sampled_mean = 0.0;  // 0 when K == 0 or during warmup
};

using MetricsSink = std::function<void(const IterRecord&)>;

struct TrainerSnapshot {
    int iteration = 0;
    bool warmup_done = false;
    Rng::State sampler_state;
    uint64_t data_epoch = 0;
    int data_cursor = 0;
    std::vector<Tensor> velocities;
};

/// Warm-up on the widest sub-network followed by sampled distillation
/// training: per iteration the widest network accumulates CE gradients and
/// each of K uniformly sampled sub-networks accumulates gradients of the
/// combined CE/KL loss against the widest network's detached logits, then a
/// single SGD step applies the normalized gradient sum.
class SupernetTrainer {
  public:
    SupernetTrainer(SupernetParams& params, const DataBundle& data, const AugmentPolicy& policy,
                    const TrainConfig& cfg, uint64_t seed, int stage);

    /// Runs warm-up (once) then main iterations up to cfg.iterations.
    /// after_iteration(t) fires after each completed main iteration.
    void run(const MetricsSink& metrics = {}, const std::function<void(int)>& after_iteration = {});

    TrainerSnapshot snapshot() const;
    void restore(const TrainerSnapshot& snap);

    int iteration() const { return iter_; }
    bool warmup_done() const { return warmup_done_; }

  private:
    void warmup_phase(const MetricsSink& metrics);
    void train_step(int t, const MetricsSink& metrics);

    SupernetParams& params_;
    TrainConfig cfg_;
    int stage_;
    SubnetEncoding all_max_;
    Sampler sampler_;
    BatchIterator batches_;
    SgdOptimizer opt_;
    int iter_ = 0;
    bool warmup_done_ = false;
};

}  // namespace supernas
