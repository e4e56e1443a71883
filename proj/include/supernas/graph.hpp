// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "supernas/tensor.hpp"

namespace supernas {

enum class BnMode { train, eval, collect };

/// View into a branch group's running statistics (the leading c entries).
/// Train-mode batchnorm updates these in place via the EMA rule.
struct RunningView {
    double* mean = nullptr;
    double* var = nullptr;
    int c = 0;
    double momentum = 0.1;
};

/// Frozen per-layer statistics used to override running stats at eval time.
struct BnStats {
    std::vector<double> mean;
    std::vector<double> var;
};

/// Exact accumulator for recalibration: raw sums over every element seen.
struct BnAccum {
    std::vector<double> sum;
    std::vector<double> sumsq;
    int64_t count = 0;

    void ensure(int c) {
        if (sum.empty()) {
            sum.assign(size_t(c), 0.0);
            sumsq.assign(size_t(c), 0.0);
        }
    }
    BnStats finalize() const;
};

/// Eager define-by-run tape. Node ids are topologically ordered by
/// construction; backward() walks them once in reverse and accumulates
/// into Parameter::grad buffers (repeated backward calls sum).
class Graph {
  public:
    using Id = int;

    Id input(Tensor x);
    Id param(Parameter& p);

    // Leading-channel slices; backward scatter-adds into the leading block.
    Id slice_conv_w(Id w, int cout, int cin);
    Id slice_vec(Id v, int c);
    Id slice_cols(Id m, int cols);

    Id conv2d(Id x, Id w, int stride, int pad);
    Id batchnorm(Id x, Id gamma, Id beta, RunningView running, double eps, BnMode mode,
                 const BnStats* override_stats = nullptr, BnAccum* accum = nullptr);
    Id relu(Id x);
    Id prelu(Id x, Id slope);
    Id add(Id a, Id b);
    Id global_avg_pool(Id x);
    Id linear(Id x, Id w, Id b);
    Id softmax_cross_entropy(Id logits, std::vector<int> labels);
    Id kl_from_teacher(Id student_logits, Tensor teacher_logits);
    Id weighted_sum(Id a, Id b, double wa, double wb);
    Id reduce_sum(Id x);
    /// sum_i x[i] * weights[i] with constant weights.
    Id inner(Id x, Tensor weights);

    const Tensor& value(Id id) const { return nodes_[size_t(id)].value; }
    double scalar_value(Id id) const;
    int size() const { return static_cast<int>(nodes_.size()); }

    void backward(Id loss);

  private:
    enum class Op {
        input,
        param,
        slice_conv_w,
        slice_vec,
        slice_cols,
        conv2d,
        batchnorm,
        relu,
        prelu,
        add,
        gap,
        linear,
        softmax_ce,
        kl_teacher,
        weighted_sum,
        reduce_sum,
        inner,
    };

    struct Node {
        Op op;
        int in0 = -1, in1 = -1, in2 = -1;
        Tensor value;
        Parameter* parameter = nullptr;

        int stride = 1, pad = 0;

        BnMode bn_mode = BnMode::train;
        double bn_eps = 0.0;
        RunningView bn_running;
        Tensor bn_xhat;                 // normalized activations
        std::vector<double> bn_invstd;  // per channel, as used in forward

        std::vector<int> labels;
        Tensor saved;   // softmax probs / teacher probs
        Tensor saved2;  // student probs for KL
        double wa = 0.0, wb = 0.0;
    };

    Id push(Node n);
    const Tensor& val(Id id) const { return nodes_[size_t(id)].value; }

    std::vector<Node> nodes_;
};

}  // namespace supernas
