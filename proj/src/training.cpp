// SPDX-License-Identifier: Apache-2.0
#include "supernas/training.hpp"

#include <cmath>

#include "supernas/kernels.hpp"

namespace supernas {

void TrainConfig::validate() const {
    if (iterations < 0 || warmup_iterations < 0) throw ValueError("train config: negative iteration count");
    if (samples_per_step < 0) throw ValueError("train config: K must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw ValueError("train config: alpha must be in [0,1]");
    if (lr_init <= 0.0 || warmup_lr <= 0.0) throw ValueError("train config: learning rate must be positive");
    if (batch_size <= 0) throw ValueError("train config: batch size must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ValueError("train config: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ValueError("train config: weight decay must be >= 0");
}

SubnetEncoding Sampler::sample() {
    SubnetEncoding enc;
    enc.choices.reserve(space_->layers.size());
    for (const auto& layer : space_->layers)
        enc.choices.push_back(layer.options[size_t(rng_.uniform_int(int(layer.options.size())))]);
    return enc;
}

double cosine_lr(int t, int total, double lr_init) {
    if (total <= 0) throw ValueError("cosine_lr: T must be positive");
    if (t < 0 || t > total) throw ValueError("cosine_lr: t out of [0,T]");
    return lr_init * 0.5 * (1.0 + std::cos(M_PI * double(t) / double(total)));
}

double distill_loss_value(const Tensor& student_logits, const Tensor& teacher_logits,
                          const std::vector<int>& labels, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ValueError("distill loss: alpha must be in [0,1]");
    Graph g;
    const Graph::Id student = g.input(student_logits);
    const Graph::Id ce = g.softmax_cross_entropy(student, labels);
    const Graph::Id kl = g.kl_from_teacher(student, teacher_logits);
    return g.scalar_value(g.weighted_sum(ce, kl, 1.0 - alpha, alpha));
}

SgdOptimizer::SgdOptimizer(SupernetParams& params, double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
    params.for_each_param([&](Parameter& p, ParamKind) { velocity_.emplace_back(p.value.shape()); });
}

void SgdOptimizer::set_velocities(std::vector<Tensor> v) {
    if (v.size() != velocity_.size()) throw ShapeError("optimizer state: velocity count mismatch");
    for (size_t i = 0; i < v.size(); ++i)
        if (!v[i].same_shape(velocity_[i])) throw ShapeError("optimizer state: velocity shape mismatch");
    velocity_ = std::move(v);
}

void SgdOptimizer::step(SupernetParams& params, double lr, double grad_scale) {
    size_t slot = 0;
    params.for_each_param([&](Parameter& p, ParamKind kind) {
        const Tensor& g = p.grad;
        for (int64_t i = 0; i < g.numel(); ++i)
            if (!std::isfinite(g[i]))
                throw NumericError("non-finite gradient in parameter slot " + std::to_string(slot) +
                                   " (element " + std::to_string(i) + ")");
        const bool decay = kind == ParamKind::conv_weight || kind == ParamKind::fc_weight;
        simd::active().sgd_update(p.value.data(), velocity_[slot].data(), g.data(), lr, momentum_,
                                  decay ? weight_decay_ : 0.0, grad_scale, g.numel());
        ++slot;
    });
}

SupernetTrainer::SupernetTrainer(SupernetParams& params, const DataBundle& data, const AugmentPolicy& policy,
                                 const TrainConfig& cfg, uint64_t seed, int stage)
    : params_(params),
      cfg_(cfg),
      stage_(stage),
      all_max_(all_max_encoding(params.space)),
      sampler_(params.space, derive_seed(seed, "sampler", {uint64_t(stage)})),
      batches_(data.train, data.mean, data.stddev, cfg.batch_size, derive_seed(seed, "data", {uint64_t(stage)}),
               policy, cfg.augment, uint64_t(stage)),
      opt_(params, cfg.momentum, cfg.weight_decay) {
    cfg_.validate();
}

void SupernetTrainer::run(const MetricsSink& metrics, const std::function<void(int)>& after_iteration) {
    if (!warmup_done_) {
        warmup_phase(metrics);
        warmup_done_ = true;
    }
    for (int t = iter_; t < cfg_.iterations; ++t) {
        train_step(t, metrics);
        iter_ = t + 1;
        if (after_iteration) after_iteration(iter_);
    }
}

void SupernetTrainer::warmup_phase(const MetricsSink& metrics) {
    for (int t = 0; t < cfg_.warmup_iterations; ++t) {
        const double lr = cosine_lr(t, cfg_.warmup_iterations, cfg_.warmup_lr);
        auto batch = batches_.next();
        params_.zero_grads();
        Graph g;
        const Graph::Id logits = build_forward(g, params_, all_max_, g.input(std::move(batch.x)), BnMode::train);
        const Graph::Id loss = g.softmax_cross_entropy(logits, batch.labels);
        const double loss_v = g.scalar_value(loss);
        if (!std::isfinite(loss_v))
            throw NumericError("warm-up diverged at iteration " + std::to_string(t));
        g.backward(loss);
        opt_.step(params_, lr, 1.0);
        if (metrics) metrics({stage_, "warmup", t, lr, loss_v, 0.0});
    }
}

void SupernetTrainer::train_step(int t, const MetricsSink& metrics) {
    const double lr = cosine_lr(t, cfg_.iterations, cfg_.lr_init);
    auto batch = batches_.next();
    params_.zero_grads();

    double loss_largest = 0.0;
    Tensor teacher_logits;
    {
        Graph g;
        const Graph::Id logits = build_forward(g, params_, all_max_, g.input(batch.x), BnMode::train);
        const Graph::Id loss = g.softmax_cross_entropy(logits, batch.labels);
        loss_largest = g.scalar_value(loss);
        g.backward(loss);
        teacher_logits = g.value(logits);
    }
    if (!std::isfinite(loss_largest))
        throw NumericError("training diverged at iteration " + std::to_string(t));

    double sampled_sum = 0.0;
    for (int i = 0; i < cfg_.samples_per_step; ++i) {
        const SubnetEncoding enc = sampler_.sample();
        Graph g;
        const Graph::Id logits = build_forward(g, params_, enc, g.input(batch.x), BnMode::train);
        const Graph::Id ce = g.softmax_cross_entropy(logits, batch.labels);
        const Graph::Id kl = g.kl_from_teacher(logits, teacher_logits);
        const Graph::Id loss = g.weighted_sum(ce, kl, 1.0 - cfg_.alpha, cfg_.alpha);
        const double loss_v = g.scalar_value(loss);
        if (!std::isfinite(loss_v))
            throw NumericError("sampled sub-network diverged at iteration " + std::to_string(t));
        sampled_sum += loss_v;
        g.backward(loss);
    }

    const double scale = cfg_.grad_normalization == GradNorm::mean_over_networks
                             ? 1.0 / double(cfg_.samples_per_step + 1)
                             : 1.0;
    opt_.step(params_, lr, scale);
    if (metrics)
        metrics({stage_, "distill", t, lr, loss_largest,
                 cfg_.samples_per_step > 0 ? sampled_sum / cfg_.samples_per_step : 0.0});
}

TrainerSnapshot SupernetTrainer::snapshot() const {
    TrainerSnapshot s;
    s.iteration = iter_;
    s.warmup_done = warmup_done_;
    s.sampler_state = sampler_.state();
    s.data_epoch = batches_.epoch();
    s.data_cursor = batches_.cursor();
    s.velocities = opt_.velocities();
    return s;
}

void SupernetTrainer::restore(const TrainerSnapshot& snap) {
    iter_ = snap.iteration;
    warmup_done_ = snap.warmup_done;
    sampler_.set_state(snap.sampler_state);
    batches_.restore(snap.data_epoch, snap.data_cursor);
    opt_.set_velocities(snap.velocities);
}

}  // namespace supernas
