// SPDX-License-Identifier: Apache-2.0
#include "supernas/supernet.hpp"

#include <cmath>
#include <cstring>

#include "supernas/rng.hpp"

namespace supernas {

namespace {

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double stddev = std::sqrt(2.0 / double(fan_in));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * stddev;
    return t;
}

Tensor head_out_in(const Tensor& t, int co, int ci) {
    const int kh = t.dim(2), kw = t.dim(3);
    Tensor out({co, ci, kh, kw});
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < ci; ++i)
            std::memcpy(out.data() + out.index4(o, i, 0, 0), t.data() + t.index4(o, i, 0, 0),
                        size_t(kh) * kw * sizeof(double));
    return out;
}

Tensor head_vec(const Tensor& t, int c) {
    Tensor out({c});
    std::memcpy(out.data(), t.data(), size_t(c) * sizeof(double));
    return out;
}

Tensor head_cols(const Tensor& t, int cols) {
    const int rows = t.dim(0);
    Tensor out({rows, cols});
    for (int r = 0; r < rows; ++r)
        std::memcpy(out.data() + int64_t(r) * cols, t.data() + t.index2(r, 0), size_t(cols) * sizeof(double));
    return out;
}

// Executed width of the widest option within a group.
int group_exec_width(const SearchSpace& space, const LayerSpec& layer, int first, int count) {
    int m = 0;
    for (int i = first; i < first + count; ++i) m = std::max(m, space.exec_width(layer.options[size_t(i)]));
    return m;
}

BranchGroup make_group(const SearchSpace& space, int layer, int first, int count, Rng& rng) {
    const LayerSpec& spec = space.layers[size_t(layer)];
    BranchGroup g;
    g.first_option = first;
    g.num_options = count;
    g.width = group_exec_width(space, spec, first, count);
    const int in_max = space.max_input_width(layer);
    g.conv_w = Parameter(he_normal({g.width, in_max, 3, 3}, in_max * 9, rng));
    g.bn_gamma = Parameter(Tensor::full({g.width}, 1.0));
    g.bn_beta = Parameter(Tensor({g.width}));
    g.bn_running_mean = Tensor({g.width});
    g.bn_running_var = Tensor::full({g.width}, 1.0);
    if (space.activation == Activation::prelu) g.prelu_slope = Parameter(Tensor::full({g.width}, 0.25));
    return g;
}

// Sliced-copy child of a parent group covering options [first, first+count).
BranchGroup child_group(const SearchSpace& space, int layer, const BranchGroup& parent, int first, int count) {
    const LayerSpec& spec = space.layers[size_t(layer)];
    BranchGroup g;
    g.first_option = first;
    g.num_options = count;
    g.width = group_exec_width(space, spec, first, count);
    const int in_max = parent.conv_w.value.dim(1);
    g.conv_w = Parameter(head_out_in(parent.conv_w.value, g.width, in_max));
    g.bn_gamma = Parameter(head_vec(parent.bn_gamma.value, g.width));
    g.bn_beta = Parameter(head_vec(parent.bn_beta.value, g.width));
    g.bn_running_mean = head_vec(parent.bn_running_mean, g.width);
    g.bn_running_var = head_vec(parent.bn_running_var, g.width);
    if (parent.prelu_slope.present()) g.prelu_slope = Parameter(head_vec(parent.prelu_slope.value, g.width));
    return g;
}

}  // namespace

int SupernetParams::group_index_of(int layer, int option) const {
    if (layer < 0 || layer >= space.num_layers()) throw ValueError("group_index_of: bad layer index");
    const int pos = space.layers[size_t(layer)].option_pos(option);
    const auto& groups = layers[size_t(layer)];
    for (size_t gi = 0; gi < groups.size(); ++gi)
        if (groups[gi].contains(pos)) return static_cast<int>(gi);
    throw ValueError("option " + std::to_string(option) + " not covered by any branch group");
}

BranchGroup& SupernetParams::group_for(int layer, int option) {
    return layers[size_t(layer)][size_t(group_index_of(layer, option))];
}

const BranchGroup& SupernetParams::group_for(int layer, int option) const {
    return layers[size_t(layer)][size_t(group_index_of(layer, option))];
}

void SupernetParams::zero_grads() {
    for_each_param([](Parameter& p, ParamKind) { p.grad.zero(); });
}

int64_t SupernetParams::param_count() const {
    int64_t n = 0;
    for_each_param([&](const Parameter& p, ParamKind) { n += p.value.numel(); });
    return n;
}

void SupernetParams::for_each_param(const std::function<void(Parameter&, ParamKind)>& fn) {
    for (auto& layer : layers)
        for (auto& g : layer) {
            fn(g.conv_w, ParamKind::conv_weight);
            fn(g.bn_gamma, ParamKind::bn_gamma);
            fn(g.bn_beta, ParamKind::bn_beta);
            if (g.prelu_slope.present()) fn(g.prelu_slope, ParamKind::prelu_slope);
        }
    for (auto& b : blocks) fn(b.proj_w, ParamKind::conv_weight);
    fn(fc_w, ParamKind::fc_weight);
    fn(fc_b, ParamKind::fc_bias);
}

void SupernetParams::for_each_param(const std::function<void(const Parameter&, ParamKind)>& fn) const {
    const_cast<SupernetParams*>(this)->for_each_param(
        std::function<void(Parameter&, ParamKind)>([&](Parameter& p, ParamKind k) { fn(p, k); }));
}

SupernetParams init_supernet(const SearchSpace& space, uint64_t seed) {
    space.validate();
    SupernetParams p;
    p.space = space;
    p.stage = 1;
    Rng rng(derive_seed(seed, "init"));
    for (int l = 0; l < space.num_layers(); ++l) {
        std::vector<BranchGroup> groups;
        groups.push_back(make_group(space, l, 0, static_cast<int>(space.layers[size_t(l)].options.size()), rng));
        p.layers.push_back(std::move(groups));
    }
    const int first_block_layer = space.has_stem() ? 1 : 0;
    for (int b = 0; b < space.num_blocks(); ++b) {
        const int conv1 = first_block_layer + 2 * b;
        const int conv2 = conv1 + 1;
        const int in_max = space.max_input_width(conv1);
        const int out_max = space.max_exec_width(conv2);
        BlockParams bp;
        bp.proj_w = Parameter(he_normal({out_max, in_max, 1, 1}, in_max, rng));
        p.blocks.push_back(std::move(bp));
    }
    const int f_max = space.max_exec_width(space.num_layers() - 1);
    p.fc_w = Parameter(he_normal({space.num_classes, f_max}, f_max, rng));
    p.fc_b = Parameter(Tensor({space.num_classes}));
    return p;
}

SupernetParams progressive_split(const SupernetParams& params) {
    if (params.stage != 1 && params.stage != 2)
        throw ValueError("progressive_split: stage " + std::to_string(params.stage) + " cannot split further");
    SupernetParams out;
    out.space = params.space;
    out.stage = params.stage + 1;
    out.bn_eps = params.bn_eps;
    out.bn_momentum = params.bn_momentum;
    out.blocks = params.blocks;
    out.fc_w = params.fc_w;
    out.fc_b = params.fc_b;
    out.layers.resize(params.layers.size());
    for (size_t l = 0; l < params.layers.size(); ++l) {
        for (const auto& g : params.layers[l]) {
            if (params.stage == 1) {
                // Halve; the lower half keeps the extra option on odd counts.
                const int lower = (g.num_options + 1) / 2;
                const int upper = g.num_options - lower;
                out.layers[l].push_back(child_group(params.space, int(l), g, g.first_option, lower));
                if (upper > 0)
                    out.layers[l].push_back(child_group(params.space, int(l), g, g.first_option + lower, upper));
            } else {
                for (int i = 0; i < g.num_options; ++i)
                    out.layers[l].push_back(child_group(params.space, int(l), g, g.first_option + i, 1));
            }
        }
    }
    return out;
}

SupernetParams extract_subnet(const SupernetParams& params, const SubnetEncoding& enc) {
    validate_encoding(params.space, enc);
    const SearchSpace& space = params.space;

    SearchSpace sub = space;
    for (size_t l = 0; l < sub.layers.size(); ++l) sub.layers[l].options = {enc.choices[l]};

    SupernetParams out;
    out.space = sub;
    out.stage = 1;
    out.bn_eps = params.bn_eps;
    out.bn_momentum = params.bn_momentum;

    int in_w = space.input_shape[0];
    for (int l = 0; l < space.num_layers(); ++l) {
        const int w = space.exec_width(enc.choices[size_t(l)]);
        const BranchGroup& g = params.group_for(l, enc.choices[size_t(l)]);
        BranchGroup sg;
        sg.first_option = 0;
        sg.num_options = 1;
        sg.width = w;
        sg.conv_w = Parameter(head_out_in(g.conv_w.value, w, in_w));
        sg.bn_gamma = Parameter(head_vec(g.bn_gamma.value, w));
        sg.bn_beta = Parameter(head_vec(g.bn_beta.value, w));
        sg.bn_running_mean = head_vec(g.bn_running_mean, w);
        sg.bn_running_var = head_vec(g.bn_running_var, w);
        if (g.prelu_slope.present()) sg.prelu_slope = Parameter(head_vec(g.prelu_slope.value, w));
        out.layers.push_back({std::move(sg)});
        in_w = w;
    }

    const int first_block_layer = space.has_stem() ? 1 : 0;
    int block_in = space.has_stem() ? space.exec_width(enc.choices[0]) : space.input_shape[0];
    for (int b = 0; b < space.num_blocks(); ++b) {
        const int conv1 = first_block_layer + 2 * b;
        const int conv2 = conv1 + 1;
        const int w2 = space.exec_width(enc.choices[size_t(conv2)]);
        BlockParams bp;
        bp.proj_w = Parameter(head_out_in(params.blocks[size_t(b)].proj_w.value, w2, block_in));
        out.blocks.push_back(std::move(bp));
        block_in = w2;
    }

    const int f = space.exec_width(enc.choices.back());
    out.fc_w = Parameter(head_cols(params.fc_w.value, f));
    out.fc_b = params.fc_b;
    return out;
}

namespace {

Graph::Id apply_activation(Graph& g, SupernetParams& p, BranchGroup& group, int width, Graph::Id x) {
    if (p.space.activation == Activation::prelu) {
        const Graph::Id slope = g.slice_vec(g.param(group.prelu_slope), width);
        return g.prelu(x, slope);
    }
    return g.relu(x);
}

Graph::Id apply_bn(Graph& g, SupernetParams& p, BranchGroup& group, int layer, int width, Graph::Id x,
                   BnMode mode, const std::vector<BnStats>* bn_override, std::vector<BnAccum>* bn_collect) {
    const Graph::Id gamma = g.slice_vec(g.param(group.bn_gamma), width);
    const Graph::Id beta = g.slice_vec(g.param(group.bn_beta), width);
    RunningView rv;
    rv.mean = group.bn_running_mean.data();
    rv.var = group.bn_running_var.data();
    rv.c = width;
    rv.momentum = p.bn_momentum;
    const BnStats* ov = nullptr;
    if (mode == BnMode::eval && bn_override != nullptr) ov = &(*bn_override)[size_t(layer)];
    BnAccum* acc = nullptr;
    if (mode == BnMode::collect && bn_collect != nullptr) acc = &(*bn_collect)[size_t(layer)];
    return g.batchnorm(x, gamma, beta, rv, p.bn_eps, mode, ov, acc);
}

}  // namespace

Graph::Id build_forward(Graph& g, SupernetParams& params, const SubnetEncoding& enc, Graph::Id input,
                        BnMode bn_mode, const std::vector<BnStats>* bn_override,
                        std::vector<BnAccum>* bn_collect) {
    validate_encoding(params.space, enc);
    const SearchSpace& space = params.space;
    if (bn_override != nullptr && bn_override->size() != size_t(space.num_layers()))
        throw ShapeError("bn override must supply stats for every searchable layer");
    if (bn_collect != nullptr && bn_collect->size() != size_t(space.num_layers()))
        throw ShapeError("bn collector must cover every searchable layer");

    Graph::Id x = input;
    int in_w = space.input_shape[0];
    int li = 0;
    if (space.has_stem()) {
        const int w = space.exec_width(enc.choices[0]);
        BranchGroup& grp = params.group_for(0, enc.choices[0]);
        x = g.conv2d(x, g.slice_conv_w(g.param(grp.conv_w), w, in_w), space.layers[0].stride, 1);
        x = apply_bn(g, params, grp, 0, w, x, bn_mode, bn_override, bn_collect);
        x = apply_activation(g, params, grp, w, x);
        in_w = w;
        li = 1;
    }
    for (int b = 0; b < space.num_blocks(); ++b) {
        const int conv1 = li, conv2 = li + 1;
        const Graph::Id block_in = x;
        const int block_in_w = in_w;
        const int stride = space.layers[size_t(conv1)].stride;

        const int w1 = space.exec_width(enc.choices[size_t(conv1)]);
        BranchGroup& g1 = params.group_for(conv1, enc.choices[size_t(conv1)]);
        x = g.conv2d(x, g.slice_conv_w(g.param(g1.conv_w), w1, block_in_w), stride, 1);
        x = apply_bn(g, params, g1, conv1, w1, x, bn_mode, bn_override, bn_collect);
        x = apply_activation(g, params, g1, w1, x);

        const int w2 = space.exec_width(enc.choices[size_t(conv2)]);
        BranchGroup& g2 = params.group_for(conv2, enc.choices[size_t(conv2)]);
        x = g.conv2d(x, g.slice_conv_w(g.param(g2.conv_w), w2, w1), 1, 1);
        x = apply_bn(g, params, g2, conv2, w2, x, bn_mode, bn_override, bn_collect);

        const Graph::Id proj =
            g.conv2d(block_in, g.slice_conv_w(g.param(params.blocks[size_t(b)].proj_w), w2, block_in_w), stride, 0);
        x = g.add(x, proj);
        x = apply_activation(g, params, g2, w2, x);

        in_w = w2;
        li += 2;
    }
    const Graph::Id feat = g.global_avg_pool(x);
    return g.linear(feat, g.slice_cols(g.param(params.fc_w), in_w), g.param(params.fc_b));
}

Tensor slice_forward(SupernetParams& params, const SubnetEncoding& enc, const Tensor& batch, BnMode bn_mode,
                     const std::vector<BnStats>* bn_override, std::vector<BnAccum>* bn_collect) {
    Graph g;
    const Graph::Id out = build_forward(g, params, enc, g.input(batch), bn_mode, bn_override, bn_collect);
    return g.value(out);
}

}  // namespace supernas
