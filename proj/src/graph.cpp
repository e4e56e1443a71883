// SPDX-License-Identifier: Apache-2.0
#include "supernas/graph.hpp"

#include <cmath>
#include <cstring>

#include "supernas/common.hpp"
#include "supernas/kernels.hpp"

namespace supernas {

namespace {

void check_4d(const Tensor& t, const char* what) {
    if (t.ndim() != 4) throw ShapeError(std::string(what) + ": expected 4-d tensor, got " + shape_str(t.shape()));
}

}  // namespace

BnStats BnAccum::finalize() const {
    if (count <= 0) throw ValueError("batchnorm recalibration: no elements accumulated");
    BnStats st;
    const size_t c = sum.size();
    st.mean.resize(c);
    st.var.resize(c);
    for (size_t i = 0; i < c; ++i) {
        const double m = sum[i] / double(count);
        st.mean[i] = m;
        st.var[i] = sumsq[i] / double(count) - m * m;
    }
    return st;
}

Graph::Id Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

double Graph::scalar_value(Id id) const {
    const Tensor& t = val(id);
    if (t.numel() != 1) throw ShapeError("scalar_value: node is not a scalar");
    return t[0];
}

Graph::Id Graph::input(Tensor x) {
    Node n;
    n.op = Op::input;
    n.value = std::move(x);
    return push(std::move(n));
}

Graph::Id Graph::param(Parameter& p) {
    if (!p.present()) throw ValueError("param: empty parameter");
    Node n;
    n.op = Op::param;
    n.value = p.value;
    n.parameter = &p;
    return push(std::move(n));
}

Graph::Id Graph::slice_conv_w(Id w, int cout, int cin) {
    const Tensor& full = val(w);
    check_4d(full, "slice_conv_w");
    if (cout <= 0 || cout > full.dim(0) || cin <= 0 || cin > full.dim(1))
        throw ShapeError("slice_conv_w: requested " + std::to_string(cout) + "x" + std::to_string(cin) +
                         " from " + shape_str(full.shape()));
    const int kh = full.dim(2), kw = full.dim(3);
    Tensor out({cout, cin, kh, kw});
    for (int o = 0; o < cout; ++o)
        for (int i = 0; i < cin; ++i)
            std::memcpy(out.data() + out.index4(o, i, 0, 0), full.data() + full.index4(o, i, 0, 0),
                        size_t(kh) * kw * sizeof(double));
    Node n;
    n.op = Op::slice_conv_w;
    n.in0 = w;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::slice_vec(Id v, int c) {
    const Tensor& full = val(v);
    if (full.ndim() != 1) throw ShapeError("slice_vec: expected 1-d tensor");
    if (c <= 0 || c > full.dim(0)) throw ShapeError("slice_vec: bad length " + std::to_string(c));
    Tensor out({c});
    std::memcpy(out.data(), full.data(), size_t(c) * sizeof(double));
    Node n;
    n.op = Op::slice_vec;
    n.in0 = v;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::slice_cols(Id m, int cols) {
    const Tensor& full = val(m);
    if (full.ndim() != 2) throw ShapeError("slice_cols: expected 2-d tensor");
    if (cols <= 0 || cols > full.dim(1)) throw ShapeError("slice_cols: bad width " + std::to_string(cols));
    const int rows = full.dim(0);
    Tensor out({rows, cols});
    for (int r = 0; r < rows; ++r)
        std::memcpy(out.data() + int64_t(r) * cols, full.data() + full.index2(r, 0), size_t(cols) * sizeof(double));
    Node n;
    n.op = Op::slice_cols;
    n.in0 = m;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::conv2d(Id x, Id w, int stride, int pad) {
    const Tensor& in = val(x);
    const Tensor& weight = val(w);
    check_4d(in, "conv2d input");
    check_4d(weight, "conv2d weight");
    if (in.dim(1) != weight.dim(1))
        throw ShapeError("conv2d: input channels " + std::to_string(in.dim(1)) + " != weight channels " +
                         std::to_string(weight.dim(1)));
    const auto d = simd::conv_dims(in.dim(0), in.dim(1), in.dim(2), in.dim(3), weight.dim(0), weight.dim(2),
                                   weight.dim(3), stride, pad);
    Tensor out({d.batch, d.cout, d.hout, d.wout});
    simd::active().conv2d_forward(out.data(), in.data(), weight.data(), d);
    Node n;
    n.op = Op::conv2d;
    n.in0 = x;
    n.in1 = w;
    n.stride = stride;
    n.pad = pad;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::batchnorm(Id x, Id gamma, Id beta, RunningView running, double eps, BnMode mode,
                           const BnStats* override_stats, BnAccum* accum) {
    const Tensor& in = val(x);
    check_4d(in, "batchnorm input");
    if (eps <= 0.0) throw ValueError("batchnorm: eps must be positive");
    const int b = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    const int64_t hw = int64_t(h) * w;
    const int64_t n_per_c = int64_t(b) * hw;
    const Tensor& g = val(gamma);
    const Tensor& bt = val(beta);
    if (g.ndim() != 1 || g.dim(0) != c || bt.ndim() != 1 || bt.dim(0) != c)
        throw ShapeError("batchnorm: gamma/beta must be length-" + std::to_string(c) + " vectors");

    std::vector<double> mean(static_cast<size_t>(c));
    std::vector<double> var(static_cast<size_t>(c));
    if (mode == BnMode::eval) {
        if (override_stats != nullptr) {
            if (override_stats->mean.size() != size_t(c)) throw ShapeError("batchnorm: override stats length mismatch");
            mean = override_stats->mean;
            var = override_stats->var;
        } else {
            if (running.mean == nullptr || running.c != c) throw ShapeError("batchnorm: missing running stats");
            mean.assign(running.mean, running.mean + c);
            var.assign(running.var, running.var + c);
        }
    } else {
        if (n_per_c < 2) throw ValueError("batchnorm: train mode needs at least 2 elements per channel");
        for (int ci = 0; ci < c; ++ci) {
            double s = 0.0, ss = 0.0;
            for (int bi = 0; bi < b; ++bi) {
                const double* row = in.data() + (int64_t(bi) * c + ci) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    const double v = row[i];
                    s += v;
                    ss += v * v;
                }
            }
            const double m = s / double(n_per_c);
            mean[size_t(ci)] = m;
            var[size_t(ci)] = ss / double(n_per_c) - m * m;
            if (mode == BnMode::train && running.mean != nullptr) {
                if (running.c != c) throw ShapeError("batchnorm: running stats length mismatch");
                const double mom = running.momentum;
                running.mean[ci] = (1.0 - mom) * running.mean[ci] + mom * mean[size_t(ci)];
                running.var[ci] = (1.0 - mom) * running.var[ci] + mom * var[size_t(ci)];
            }
            if (mode == BnMode::collect && accum != nullptr) {
                accum->ensure(c);
                accum->sum[size_t(ci)] += s;
                accum->sumsq[size_t(ci)] += ss;
            }
        }
        if (mode == BnMode::collect && accum != nullptr) accum->count += n_per_c;
    }

    Node n;
    n.op = Op::batchnorm;
    n.in0 = x;
    n.in1 = gamma;
    n.in2 = beta;
    n.bn_mode = mode;
    n.bn_eps = eps;
    n.bn_running = running;
    n.bn_invstd.resize(size_t(c));
    std::vector<double> shift(static_cast<size_t>(c));
    for (int ci = 0; ci < c; ++ci) {
        const double inv = 1.0 / std::sqrt(var[size_t(ci)] + eps);
        n.bn_invstd[size_t(ci)] = inv;
        shift[size_t(ci)] = -mean[size_t(ci)] * inv;
    }
    n.bn_xhat = Tensor(in.shape());
    simd::active().affine_channel(n.bn_xhat.data(), in.data(), n.bn_invstd.data(), shift.data(), b, c, hw);
    Tensor out(in.shape());
    simd::active().affine_channel(out.data(), n.bn_xhat.data(), g.data(), bt.data(), b, c, hw);
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::relu(Id x) {
    const Tensor& in = val(x);
    Tensor out(in.shape());
    simd::active().relu_forward(out.data(), in.data(), in.numel());
    Node n;
    n.op = Op::relu;
    n.in0 = x;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::prelu(Id x, Id slope) {
    const Tensor& in = val(x);
    check_4d(in, "prelu input");
    const Tensor& a = val(slope);
    if (a.ndim() != 1 || a.dim(0) != in.dim(1))
        throw ShapeError("prelu: slope must have one value per channel");
    Tensor out(in.shape());
    simd::active().prelu_forward(out.data(), in.data(), a.data(), in.dim(0), in.dim(1),
                                 int64_t(in.dim(2)) * in.dim(3));
    Node n;
    n.op = Op::prelu;
    n.in0 = x;
    n.in1 = slope;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::add(Id a, Id b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (!x.same_shape(y))
        throw ShapeError("add: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    Tensor out(x.shape());
    simd::active().add(out.data(), x.data(), y.data(), x.numel());
    Node n;
    n.op = Op::add;
    n.in0 = a;
    n.in1 = b;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::global_avg_pool(Id x) {
    const Tensor& in = val(x);
    check_4d(in, "global_avg_pool input");
    const int b = in.dim(0), c = in.dim(1);
    const int64_t hw = int64_t(in.dim(2)) * in.dim(3);
    Tensor out({b, c});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
            const double* row = in.data() + (int64_t(bi) * c + ci) * hw;
            double s = 0.0;
            for (int64_t i = 0; i < hw; ++i) s += row[i];
            out.at2(bi, ci) = s / double(hw);
        }
    Node n;
    n.op = Op::gap;
    n.in0 = x;
    n.value = std::move(out);
    return push(std::move(n));
}

Graph::Id Graph::linear(Id x, Id w, Id b) {
    const Tensor& in = val(x);
    const Tensor& weight = val(w);
    const Tensor& bias = val(b);
    if (in.ndim() != 2 || weight.ndim() != 2 || bias.ndim() != 1)
        throw ShapeError("linear: expected x[B,F], w[K,F], b[K]");
    if (in.dim(1) != weight.dim(1) || weight.dim(0) != bias.dim(0))
        throw ShapeError("linear: inconsistent shapes " + shape_str(in.shape()) + ", " +
                         shape_str(weight.shape()) + ", " + shape_str(bias.shape()));
    const int batch = in.dim(0), f = in.dim(1), k = weight.dim(0);
    Tensor out({batch, k});
    for (int bi = 0; bi < batch; ++bi)
        for (int ki = 0; ki < k; ++ki) {
            double acc = bias[ki];
            const double* xr = in.data() + int64_t(bi) * f;
            const double* wr = weight.data() + int64_t(ki) * f;
            for (int fi = 0; fi < f; ++fi) acc += xr[fi] * wr[fi];
            out.at2(bi, ki) = acc;
        }
    Node n;
    n.op = Op::linear;
    n.in0 = x;
    n.in1 = w;
    n.in2 = b;
    n.value = std::move(out);
    return push(std::move(n));
}

namespace {

// Row-stabilized softmax written into probs; returns per-row logsumexp.
void softmax_rows(const Tensor& logits, Tensor& probs, std::vector<double>* lse_out) {
    const int b = logits.dim(0), k = logits.dim(1);
    for (int bi = 0; bi < b; ++bi) {
        const double* z = logits.data() + int64_t(bi) * k;
        double* p = probs.data() + int64_t(bi) * k;
        double m = z[0];
        for (int i = 1; i < k; ++i) m = std::max(m, z[i]);
        double se = 0.0;
        for (int i = 0; i < k; ++i) {
            p[i] = std::exp(z[i] - m);
            se += p[i];
        }
        for (int i = 0; i < k; ++i) p[i] /= se;
        if (lse_out != nullptr) (*lse_out)[size_t(bi)] = m + std::log(se);
    }
}

}  // namespace

Graph::Id Graph::softmax_cross_entropy(Id logits, std::vector<int> labels) {
    const Tensor& z = val(logits);
    if (z.ndim() != 2) throw ShapeError("softmax_cross_entropy: logits must be [B,K]");
    const int b = z.dim(0), k = z.dim(1);
    if (static_cast<int>(labels.size()) != b)
        throw ShapeError("softmax_cross_entropy: labels length != batch");
    for (int l : labels)
        if (l < 0 || l >= k)
            throw ValueError("softmax_cross_entropy: label " + std::to_string(l) + " out of range [0," +
                             std::to_string(k) + ")");
    Tensor probs({b, k});
    std::vector<double> lse(static_cast<size_t>(b));
    softmax_rows(z, probs, &lse);
    double loss = 0.0;
    for (int bi = 0; bi < b; ++bi) loss += lse[size_t(bi)] - z.at2(bi, labels[size_t(bi)]);
    loss /= double(b);
    Node n;
    n.op = Op::softmax_ce;
    n.in0 = logits;
    n.labels = std::move(labels);
    n.saved = std::move(probs);
    n.value = Tensor::scalar(loss);
    return push(std::move(n));
}

Graph::Id Graph::kl_from_teacher(Id student_logits, Tensor teacher_logits) {
    const Tensor& z = val(student_logits);
    if (z.ndim() != 2) throw ShapeError("kl_from_teacher: logits must be [B,K]");
    if (!z.same_shape(teacher_logits))
        throw ShapeError("kl_from_teacher: student " + shape_str(z.shape()) + " vs teacher " +
                         shape_str(teacher_logits.shape()));
    const int b = z.dim(0), k = z.dim(1);
    Tensor p({b, k}), q({b, k});
    softmax_rows(teacher_logits, p, nullptr);
    softmax_rows(z, q, nullptr);
    double loss = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        const double* pr = p.data() + int64_t(bi) * k;
        const double* qr = q.data() + int64_t(bi) * k;
        for (int i = 0; i < k; ++i)
            if (pr[i] > 0.0) loss += pr[i] * (std::log(pr[i]) - std::log(qr[i]));
    }
    loss /= double(b);
    Node n;
    n.op = Op::kl_teacher;
    n.in0 = student_logits;
    n.saved = std::move(p);
    n.saved2 = std::move(q);
    n.value = Tensor::scalar(loss);
    return push(std::move(n));
}

Graph::Id Graph::weighted_sum(Id a, Id b, double wa, double wb) {
    if (val(a).numel() != 1 || val(b).numel() != 1) throw ShapeError("weighted_sum: inputs must be scalars");
    Node n;
    n.op = Op::weighted_sum;
    n.in0 = a;
    n.in1 = b;
    n.wa = wa;
    n.wb = wb;
    n.value = Tensor::scalar(wa * val(a)[0] + wb * val(b)[0]);
    return push(std::move(n));
}

Graph::Id Graph::reduce_sum(Id x) {
    const Tensor& in = val(x);
    double s = 0.0;
    for (int64_t i = 0; i < in.numel(); ++i) s += in[i];
    Node n;
    n.op = Op::reduce_sum;
    n.in0 = x;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

Graph::Id Graph::inner(Id x, Tensor weights) {
    const Tensor& in = val(x);
    if (in.numel() != weights.numel()) throw ShapeError("inner: length mismatch");
    double s = 0.0;
    for (int64_t i = 0; i < in.numel(); ++i) s += in[i] * weights[i];
    Node n;
    n.op = Op::inner;
    n.in0 = x;
    n.saved = std::move(weights);
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

void Graph::backward(Id loss) {
    if (loss < 0 || loss >= size()) throw ValueError("backward: bad node id");
    if (val(loss).numel() != 1) throw ShapeError("backward: loss node must be scalar");

    std::vector<Tensor> adj(nodes_.size());
    auto ensure = [&](Id id) -> Tensor& {
        Tensor& t = adj[size_t(id)];
        if (t.numel() == 0) t = Tensor(val(id).shape());
        return t;
    };
    ensure(loss)[0] = 1.0;

    const auto& K = simd::active();
    for (Id id = loss; id >= 0; --id) {
        Node& n = nodes_[size_t(id)];
        Tensor& g = adj[size_t(id)];
        if (g.empty()) continue;  // node not on the path to the loss
        switch (n.op) {
            case Op::input:
                break;
            case Op::param:
                K.accumulate(n.parameter->grad.data(), g.data(), g.numel());
                break;
            case Op::slice_conv_w: {
                Tensor& gin = ensure(n.in0);
                const Tensor& full = val(n.in0);
                const int cout = n.value.dim(0), cin = n.value.dim(1);
                const int kh = full.dim(2), kw = full.dim(3);
                for (int o = 0; o < cout; ++o)
                    for (int i = 0; i < cin; ++i)
                        K.accumulate(gin.data() + full.index4(o, i, 0, 0), g.data() + n.value.index4(o, i, 0, 0),
                                     int64_t(kh) * kw);
                break;
            }
            case Op::slice_vec: {
                Tensor& gin = ensure(n.in0);
                K.accumulate(gin.data(), g.data(), g.numel());
                break;
            }
            case Op::slice_cols: {
                Tensor& gin = ensure(n.in0);
                const Tensor& full = val(n.in0);
                const int rows = n.value.dim(0), cols = n.value.dim(1);
                for (int r = 0; r < rows; ++r)
                    K.accumulate(gin.data() + full.index2(r, 0), g.data() + int64_t(r) * cols, cols);
                break;
            }
            case Op::conv2d: {
                const Tensor& in = val(n.in0);
                const Tensor& w = val(n.in1);
                const auto d = simd::conv_dims(in.dim(0), in.dim(1), in.dim(2), in.dim(3), w.dim(0), w.dim(2),
                                               w.dim(3), n.stride, n.pad);
                K.conv2d_backward_input(ensure(n.in0).data(), g.data(), w.data(), d);
                K.conv2d_backward_weight(ensure(n.in1).data(), g.data(), in.data(), d);
                break;
            }
            case Op::batchnorm: {
                const Tensor& in = val(n.in0);
                const Tensor& gamma = val(n.in1);
                const int b = in.dim(0), c = in.dim(1);
                const int64_t hw = int64_t(in.dim(2)) * in.dim(3);
                const int64_t n_per_c = int64_t(b) * hw;
                std::vector<double> s1(size_t(c), 0.0), s2(size_t(c), 0.0);
                for (int bi = 0; bi < b; ++bi)
                    for (int ci = 0; ci < c; ++ci) {
                        const double* gr = g.data() + (int64_t(bi) * c + ci) * hw;
                        const double* xr = n.bn_xhat.data() + (int64_t(bi) * c + ci) * hw;
                        double a = 0.0, bsum = 0.0;
                        for (int64_t i = 0; i < hw; ++i) {
                            a += gr[i];
                            bsum += gr[i] * xr[i];
                        }
                        s1[size_t(ci)] += a;
                        s2[size_t(ci)] += bsum;
                    }
                Tensor& dgamma = ensure(n.in1);
                Tensor& dbeta = ensure(n.in2);
                for (int ci = 0; ci < c; ++ci) {
                    dgamma[ci] += s2[size_t(ci)];
                    dbeta[ci] += s1[size_t(ci)];
                }
                std::vector<double> sc(static_cast<size_t>(c));
                std::vector<double> m1(static_cast<size_t>(c), 0.0);
                std::vector<double> m2(static_cast<size_t>(c), 0.0);
                for (int ci = 0; ci < c; ++ci) sc[size_t(ci)] = gamma[ci] * n.bn_invstd[size_t(ci)];
                if (n.bn_mode != BnMode::eval) {
                    for (int ci = 0; ci < c; ++ci) {
                        m1[size_t(ci)] = s1[size_t(ci)] / double(n_per_c);
                        m2[size_t(ci)] = s2[size_t(ci)] / double(n_per_c);
                    }
                }
                K.bn_backward_elem(ensure(n.in0).data(), g.data(), n.bn_xhat.data(), sc.data(), m1.data(),
                                   m2.data(), b, c, hw);
                break;
            }
            case Op::relu: {
                const Tensor& in = val(n.in0);
                K.relu_backward(ensure(n.in0).data(), in.data(), g.data(), in.numel());
                break;
            }
            case Op::prelu: {
                const Tensor& in = val(n.in0);
                const Tensor& slope = val(n.in1);
                K.prelu_backward(ensure(n.in0).data(), ensure(n.in1).data(), in.data(), g.data(), slope.data(),
                                 in.dim(0), in.dim(1), int64_t(in.dim(2)) * in.dim(3));
                break;
            }
            case Op::add:
                K.accumulate(ensure(n.in0).data(), g.data(), g.numel());
                K.accumulate(ensure(n.in1).data(), g.data(), g.numel());
                break;
            case Op::gap: {
                const Tensor& in = val(n.in0);
                Tensor& gin = ensure(n.in0);
                const int b = in.dim(0), c = in.dim(1);
                const int64_t hw = int64_t(in.dim(2)) * in.dim(3);
                for (int bi = 0; bi < b; ++bi)
                    for (int ci = 0; ci < c; ++ci) {
                        const double gv = g.at2(bi, ci) / double(hw);
                        double* row = gin.data() + (int64_t(bi) * c + ci) * hw;
                        for (int64_t i = 0; i < hw; ++i) row[i] += gv;
                    }
                break;
            }
            case Op::linear: {
                const Tensor& in = val(n.in0);
                const Tensor& w = val(n.in1);
                const int batch = in.dim(0), f = in.dim(1), k = w.dim(0);
                Tensor& dx = ensure(n.in0);
                Tensor& dw = ensure(n.in1);
                Tensor& db = ensure(n.in2);
                for (int bi = 0; bi < batch; ++bi)
                    for (int ki = 0; ki < k; ++ki) {
                        const double gv = g.at2(bi, ki);
                        const double* wr = w.data() + int64_t(ki) * f;
                        double* dxr = dx.data() + int64_t(bi) * f;
                        for (int fi = 0; fi < f; ++fi) dxr[fi] += gv * wr[fi];
                        const double* xr = in.data() + int64_t(bi) * f;
                        double* dwr = dw.data() + int64_t(ki) * f;
                        for (int fi = 0; fi < f; ++fi) dwr[fi] += gv * xr[fi];
                        db[ki] += gv;
                    }
                break;
            }
            case Op::softmax_ce: {
                const double gv = g[0];
                const Tensor& probs = n.saved;
                const int b = probs.dim(0), k = probs.dim(1);
                Tensor& dz = ensure(n.in0);
                for (int bi = 0; bi < b; ++bi) {
                    const double* pr = probs.data() + int64_t(bi) * k;
                    double* dr = dz.data() + int64_t(bi) * k;
                    const int label = n.labels[size_t(bi)];
                    for (int i = 0; i < k; ++i) {
                        const double delta = (i == label) ? 1.0 : 0.0;
                        dr[i] += gv * (pr[i] - delta) / double(b);
                    }
                }
                break;
            }
            case Op::kl_teacher: {
                const double gv = g[0];
                const Tensor& p = n.saved;
                const Tensor& q = n.saved2;
                const int b = p.dim(0), k = p.dim(1);
                Tensor& dz = ensure(n.in0);
                for (int bi = 0; bi < b; ++bi) {
                    const double* pr = p.data() + int64_t(bi) * k;
                    const double* qr = q.data() + int64_t(bi) * k;
                    double* dr = dz.data() + int64_t(bi) * k;
                    for (int i = 0; i < k; ++i) dr[i] += gv * (qr[i] - pr[i]) / double(b);
                }
                break;
            }
            case Op::weighted_sum: {
                ensure(n.in0)[0] += n.wa * g[0];
                ensure(n.in1)[0] += n.wb * g[0];
                break;
            }
            case Op::reduce_sum: {
                const double gv = g[0];
                Tensor& gin = ensure(n.in0);
                for (int64_t i = 0; i < gin.numel(); ++i) gin[i] += gv;
                break;
            }
            case Op::inner: {
                const double gv = g[0];
                Tensor& gin = ensure(n.in0);
                for (int64_t i = 0; i < gin.numel(); ++i) gin[i] += gv * n.saved[i];
                break;
            }
        }
    }
}

}  // namespace supernas
