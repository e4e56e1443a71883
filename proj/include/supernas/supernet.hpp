// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "supernas/graph.hpp"
#include "supernas/search_space.hpp"
#include "supernas/tensor.hpp"

namespace supernas {

/// A contiguous run of one layer's channel options sharing one weight copy.
/// Tensors are allocated at the group's widest executed width; narrower
/// options slice the leading channels.
struct BranchGroup {
    int first_option = 0;  // position in the layer's option list
    int num_options = 0;
    int width = 0;  // executed width of the widest member option
    Parameter conv_w;
    Parameter bn_gamma, bn_beta;
    Tensor bn_running_mean, bn_running_var;
    Parameter prelu_slope;  // present only for prelu spaces

    bool contains(int option_pos) const {
        return option_pos >= first_option && option_pos < first_option + num_options;
    }
};

struct BlockParams {
    Parameter proj_w;  // 1x1 projection shortcut shared per block
};

enum class ParamKind { conv_weight, bn_gamma, bn_beta, prelu_slope, fc_weight, fc_bias };

struct SupernetParams {
    SearchSpace space;
    int stage = 1;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
    std::vector<std::vector<BranchGroup>> layers;  // per searchable layer
    std::vector<BlockParams> blocks;               // per residual block
    Parameter fc_w, fc_b;

    int group_index_of(int layer, int option) const;
    BranchGroup& group_for(int layer, int option);
    const BranchGroup& group_for(int layer, int option) const;

    void zero_grads();
    int64_t param_count() const;

    /// Canonical parameter enumeration; checkpoints and optimizer state
    /// follow this order.
    void for_each_param(const std::function<void(Parameter&, ParamKind)>& fn);
    void for_each_param(const std::function<void(const Parameter&, ParamKind)>& fn) const;
};

SupernetParams init_supernet(const SearchSpace& space, uint64_t seed);

/// Stage 1 -> 2 halves every layer's option list (lower half keeps the extra
/// option on odd counts); stage 2 -> 3 splits every group into singletons.
/// Child tensors are sliced copies, so every encoding computes identical
/// outputs before and after.
SupernetParams progressive_split(const SupernetParams& params);

/// Dense stand-alone copy of one sub-network (no sharing with the supernet).
SupernetParams extract_subnet(const SupernetParams& params, const SubnetEncoding& enc);

Graph::Id build_forward(Graph& g, SupernetParams& params, const SubnetEncoding& enc, Graph::Id input,
                        BnMode bn_mode, const std::vector<BnStats>* bn_override = nullptr,
                        std::vector<BnAccum>* bn_collect = nullptr);

/// Forward-only convenience: logits for one batch.
Tensor slice_forward(SupernetParams& params, const SubnetEncoding& enc, const Tensor& batch, BnMode bn_mode,
                     const std::vector<BnStats>* bn_override = nullptr,
                     std::vector<BnAccum>* bn_collect = nullptr);

}  // namespace supernas
