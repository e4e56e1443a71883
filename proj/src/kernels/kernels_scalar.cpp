// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. These define the canonical accumulation order that the
// SIMD variants must reproduce exactly; keep the loops straightforward.

#include "supernas/kernels.hpp"

namespace supernas::simd {

namespace scalar {

void conv2d_forward(double* out, const double* in, const double* w, const ConvDims& d) {
    const int64_t in_chw = int64_t(d.cin) * d.h * d.w;
    const int64_t out_chw = int64_t(d.cout) * d.hout * d.wout;
    const int64_t w_c = int64_t(d.cin) * d.kh * d.kw;
    for (int b = 0; b < d.batch; ++b) {
        for (int co = 0; co < d.cout; ++co) {
            double* orow = out + b * out_chw + int64_t(co) * d.hout * d.wout;
            const double* wco = w + int64_t(co) * w_c;
            for (int oh = 0; oh < d.hout; ++oh) {
                for (int ow = 0; ow < d.wout; ++ow) {
                    double acc = 0.0;
                    for (int ci = 0; ci < d.cin; ++ci) {
                        const double* xc = in + b * in_chw + int64_t(ci) * d.h * d.w;
                        const double* wc = wco + int64_t(ci) * d.kh * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int ih = oh * d.stride + kh - d.pad;
                            if (ih < 0 || ih >= d.h) continue;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const int iw = ow * d.stride + kw - d.pad;
                                if (iw < 0 || iw >= d.w) continue;
                                acc += wc[kh * d.kw + kw] * xc[int64_t(ih) * d.w + iw];
                            }
                        }
                    }
                    orow[int64_t(oh) * d.wout + ow] = acc;
                }
            }
        }
    }
}

void conv2d_backward_input(double* din, const double* dout, const double* w, const ConvDims& d) {
    const int64_t in_chw = int64_t(d.cin) * d.h * d.w;
    const int64_t out_chw = int64_t(d.cout) * d.hout * d.wout;
    const int64_t w_c = int64_t(d.cin) * d.kh * d.kw;
    for (int b = 0; b < d.batch; ++b) {
        for (int ci = 0; ci < d.cin; ++ci) {
            double* drow = din + b * in_chw + int64_t(ci) * d.h * d.w;
            for (int ih = 0; ih < d.h; ++ih) {
                for (int iw = 0; iw < d.w; ++iw) {
                    double acc = 0.0;
                    for (int co = 0; co < d.cout; ++co) {
                        const double* gc = dout + b * out_chw + int64_t(co) * d.hout * d.wout;
                        const double* wc = w + int64_t(co) * w_c + int64_t(ci) * d.kh * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int oh_num = ih + d.pad - kh;
                            if (oh_num < 0 || oh_num % d.stride != 0) continue;
                            const int oh = oh_num / d.stride;
                            if (oh >= d.hout) continue;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const int ow_num = iw + d.pad - kw;
                                if (ow_num < 0 || ow_num % d.stride != 0) continue;
                                const int ow = ow_num / d.stride;
                                if (ow >= d.wout) continue;
                                acc += wc[kh * d.kw + kw] * gc[int64_t(oh) * d.wout + ow];
                            }
                        }
                    }
                    drow[int64_t(ih) * d.w + iw] += acc;
                }
            }
        }
    }
}

void conv2d_backward_weight(double* dw, const double* dout, const double* in, const ConvDims& d) {
    const int64_t in_chw = int64_t(d.cin) * d.h * d.w;
    const int64_t out_chw = int64_t(d.cout) * d.hout * d.wout;
    const int64_t w_c = int64_t(d.cin) * d.kh * d.kw;
    for (int co = 0; co < d.cout; ++co) {
        for (int ci = 0; ci < d.cin; ++ci) {
            for (int kh = 0; kh < d.kh; ++kh) {
                for (int kw = 0; kw < d.kw; ++kw) {
                    double acc = 0.0;
                    for (int b = 0; b < d.batch; ++b) {
                        const double* gc = dout + b * out_chw + int64_t(co) * d.hout * d.wout;
                        const double* xc = in + b * in_chw + int64_t(ci) * d.h * d.w;
                        for (int oh = 0; oh < d.hout; ++oh) {
                            const int ih = oh * d.stride + kh - d.pad;
                            if (ih < 0 || ih >= d.h) continue;
                            for (int ow = 0; ow < d.wout; ++ow) {
                                const int iw = ow * d.stride + kw - d.pad;
                                if (iw < 0 || iw >= d.w) continue;
                                acc += gc[int64_t(oh) * d.wout + ow] * xc[int64_t(ih) * d.w + iw];
                            }
                        }
                    }
                    dw[(int64_t(co) * w_c) + int64_t(ci) * d.kh * d.kw + kh * d.kw + kw] += acc;
                }
            }
        }
    }
}

void relu_forward(double* y, const double* x, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(double* dx, const double* x, const double* dy, int64_t n) {
    for (int64_t i = 0; i < n; ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
}

void prelu_forward(double* y, const double* x, const double* slope, int b, int c, int64_t hw) {
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const double a = slope[ci];
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                const double v = x[base + i];
                y[base + i] = v > 0.0 ? v : a * v;
            }
        }
    }
}

void prelu_backward(double* dx, double* dslope, const double* x, const double* dy, const double* slope,
                    int b, int c, int64_t hw) {
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const double a = slope[ci];
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            double ds = 0.0;
            for (int64_t i = 0; i < hw; ++i) {
                const double v = x[base + i];
                const double g = dy[base + i];
                if (v > 0.0) {
                    dx[base + i] += g;
                } else {
                    dx[base + i] += a * g;
                    ds += v * g;
                }
            }
            dslope[ci] += ds;
        }
    }
}

void affine_channel(double* y, const double* x, const double* scale, const double* shift,
                    int b, int c, int64_t hw) {
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const double s = scale[ci];
            const double t = shift[ci];
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) y[base + i] = s * x[base + i] + t;
        }
    }
}

void bn_backward_elem(double* dx, const double* dy, const double* xhat, const double* s,
                      const double* m1, const double* m2, int b, int c, int64_t hw) {
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const double sc = s[ci];
            const double a1 = m1[ci];
            const double a2 = m2[ci];
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i)
                dx[base + i] += sc * (dy[base + i] - a1 - xhat[base + i] * a2);
        }
    }
}

void add(double* z, const double* x, const double* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void accumulate(double* y, const double* x, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += x[i];
}

void axpy(double* y, double a, const double* x, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double* x, double a, int64_t n) {
    for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

void sgd_update(double* w, double* v, const double* g, double lr, double momentum, double wd,
                double gscale, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        const double t = g[i] * gscale + wd * w[i];
        v[i] = momentum * v[i] + t;
        w[i] -= lr * v[i];
    }
}

}  // namespace scalar

const Kernels& scalar_kernels() {
    static const Kernels k = {
        scalar::conv2d_forward,
        scalar::conv2d_backward_input,
        scalar::conv2d_backward_weight,
        scalar::relu_forward,
        scalar::relu_backward,
        scalar::prelu_forward,
        scalar::prelu_backward,
        scalar::affine_channel,
        scalar::bn_backward_elem,
        scalar::add,
        scalar::accumulate,
        scalar::axpy,
        scalar::scale,
        scalar::sgd_update,
    };
    return k;
}

}  // namespace supernas::simd
