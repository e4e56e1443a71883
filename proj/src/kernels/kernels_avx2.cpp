// SPDX-License-Identifier: Apache-2.0
//
// AVX2 variants. Lanes always map to independent outputs and each lane
// repeats the scalar reference's accumulation order, so results match the
// scalar kernels bit for bit (up to the sign of exact zeros). Inputs are
// copied into zero-padded buffers so no load needs a mask; a padded zero
// contributes +0.0, which is what the reference's bounds check skips.

#include <immintrin.h>

#include <vector>

#include "supernas/kernels.hpp"

namespace supernas::simd {

namespace avx2 {

inline __m256d load_strided(const double* p, int stride) {
    if (stride == 1) return _mm256_loadu_pd(p);
    return _mm256_setr_pd(p[0], p[stride], p[2 * stride], p[3 * stride]);
}

// Zero-padded copy of one [c,h,w] image block.
void pad_image(std::vector<double>& buf, const double* src, int c, int h, int w, int pad) {
    const int hp = h + 2 * pad;
    const int wp = w + 2 * pad;
    buf.assign(size_t(c) * hp * wp, 0.0);
    for (int ci = 0; ci < c; ++ci) {
        for (int ih = 0; ih < h; ++ih) {
            double* dst = buf.data() + (int64_t(ci) * hp + ih + pad) * wp + pad;
            const double* row = src + (int64_t(ci) * h + ih) * w;
            for (int iw = 0; iw < w; ++iw) dst[iw] = row[iw];
        }
    }
}

void conv2d_forward(double* out, const double* in, const double* w, const ConvDims& d) {
    const int hp = d.h + 2 * d.pad;
    const int wp = d.w + 2 * d.pad;
    const int64_t in_chw = int64_t(d.cin) * d.h * d.w;
    const int64_t out_chw = int64_t(d.cout) * d.hout * d.wout;
    const int64_t w_c = int64_t(d.cin) * d.kh * d.kw;
    std::vector<double> padded;
    for (int b = 0; b < d.batch; ++b) {
        pad_image(padded, in + b * in_chw, d.cin, d.h, d.w, d.pad);
        const double* P = padded.data();
        for (int co = 0; co < d.cout; ++co) {
            const double* wco = w + int64_t(co) * w_c;
            double* orow = out + b * out_chw + int64_t(co) * d.hout * d.wout;
            for (int oh = 0; oh < d.hout; ++oh) {
                int ow = 0;
                for (; ow + 4 <= d.wout; ow += 4) {
                    __m256d acc = _mm256_setzero_pd();
                    for (int ci = 0; ci < d.cin; ++ci) {
                        const double* pc = P + int64_t(ci) * hp * wp;
                        const double* wc = wco + int64_t(ci) * d.kh * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const double* prow = pc + int64_t(oh * d.stride + kh) * wp + ow * d.stride;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const __m256d wv = _mm256_set1_pd(wc[kh * d.kw + kw]);
                                const __m256d xv = load_strided(prow + kw, d.stride);
                                acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, xv));
                            }
                        }
                    }
                    _mm256_storeu_pd(orow + int64_t(oh) * d.wout + ow, acc);
                }
                for (; ow < d.wout; ++ow) {
                    double acc = 0.0;
                    for (int ci = 0; ci < d.cin; ++ci) {
                        const double* pc = P + int64_t(ci) * hp * wp;
                        const double* wc = wco + int64_t(ci) * d.kh * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const double* prow = pc + int64_t(oh * d.stride + kh) * wp + ow * d.stride;
                            for (int kw = 0; kw < d.kw; ++kw) acc += wc[kh * d.kw + kw] * prow[kw];
                        }
                    }
                    orow[int64_t(oh) * d.wout + ow] = acc;
                }
            }
        }
    }
}

void conv2d_backward_input(double* din, const double* dout, const double* w, const ConvDims& d) {
    const int qh = d.kh - 1 - d.pad;
    const int qw = d.kw - 1 - d.pad;
    if (d.stride != 1 || qh < 0 || qw < 0) {
        scalar_kernels().conv2d_backward_input(din, dout, w, d);
        return;
    }
    const int hq = d.hout + 2 * qh;
    const int wq = d.wout + 2 * qw;
    const int64_t in_chw = int64_t(d.cin) * d.h * d.w;
    const int64_t out_chw = int64_t(d.cout) * d.hout * d.wout;
    const int64_t w_c = int64_t(d.cin) * d.kh * d.kw;
    std::vector<double> padded;
    for (int b = 0; b < d.batch; ++b) {
        padded.assign(size_t(d.cout) * hq * wq, 0.0);
        for (int co = 0; co < d.cout; ++co)
            for (int oh = 0; oh < d.hout; ++oh) {
                const double* src = dout + b * out_chw + (int64_t(co) * d.hout + oh) * d.wout;
                double* dst = padded.data() + (int64_t(co) * hq + oh + qh) * wq + qw;
                for (int ow = 0; ow < d.wout; ++ow) dst[ow] = src[ow];
            }
        const double* P = padded.data();
        for (int ci = 0; ci < d.cin; ++ci) {
            double* drow = din + b * in_chw + int64_t(ci) * d.h * d.w;
            for (int ih = 0; ih < d.h; ++ih) {
                int iw = 0;
                for (; iw + 4 <= d.w; iw += 4) {
                    __m256d acc = _mm256_setzero_pd();
                    for (int co = 0; co < d.cout; ++co) {
                        const double* pc = P + int64_t(co) * hq * wq;
                        const double* wc = w + int64_t(co) * w_c + int64_t(ci) * d.kh * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const double* prow = pc + int64_t(ih + d.kh - 1 - kh) * wq + iw;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const __m256d wv = _mm256_set1_pd(wc[kh * d.kw + kw]);
                                const __m256d gv = _mm256_loadu_pd(prow + (d.kw - 1 - kw));
                                acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, gv));
                            }
                        }
                    }
                    double* dst = drow + int64_t(ih) * d.w + iw;
                    _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), acc));
                }
                for (; iw < d.w; ++iw) {
                    double acc = 0.0;
                    for (int co = 0; co < d.cout; ++co) {
                        const double* pc = P + int64_t(co) * hq * wq;
                        const double* wc = w + int64_t(co) * w_c + int64_t(ci) * d.kh * d.kw;
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const double* prow = pc + int64_t(ih + d.kh - 1 - kh) * wq + iw;
                            for (int kw = 0; kw < d.kw; ++kw)
                                acc += wc[kh * d.kw + kw] * prow[d.kw - 1 - kw];
                        }
                    }
                    drow[int64_t(ih) * d.w + iw] += acc;
                }
            }
        }
    }
}

void conv2d_backward_weight(double* dw, const double* dout, const double* in, const ConvDims& d) {
    const int hp = d.h + 2 * d.pad;
    const int wp = d.w + 2 * d.pad;
    const int64_t in_chw = int64_t(d.cin) * d.h * d.w;
    const int64_t out_chw = int64_t(d.cout) * d.hout * d.wout;
    const int64_t w_c = int64_t(d.cin) * d.kh * d.kw;
    // Pad every image once; the b loop is the innermost reduction level.
    std::vector<std::vector<double>> padded(size_t(d.batch));
    for (int b = 0; b < d.batch; ++b) pad_image(padded[size_t(b)], in + b * in_chw, d.cin, d.h, d.w, d.pad);

    const int khw = d.kh * d.kw;
    for (int co = 0; co < d.cout; ++co) {
        int64_t f = 0;
        for (; f + 4 <= w_c; f += 4) {
            int64_t off[4];
            for (int j = 0; j < 4; ++j) {
                const int64_t fj = f + j;
                const int ci = int(fj / khw);
                const int kh = int((fj % khw) / d.kw);
                const int kw = int(fj % d.kw);
                off[j] = int64_t(ci) * hp * wp + int64_t(kh) * wp + kw;
            }
            __m256d acc = _mm256_setzero_pd();
            for (int b = 0; b < d.batch; ++b) {
                const double* P = padded[size_t(b)].data();
                const double* gc = dout + b * out_chw + int64_t(co) * d.hout * d.wout;
                for (int oh = 0; oh < d.hout; ++oh) {
                    const int64_t row = int64_t(oh * d.stride) * wp;
                    for (int ow = 0; ow < d.wout; ++ow) {
                        const int64_t base = row + int64_t(ow) * d.stride;
                        const __m256d gv = _mm256_set1_pd(gc[int64_t(oh) * d.wout + ow]);
                        const __m256d xv = _mm256_setr_pd(P[off[0] + base], P[off[1] + base],
                                                          P[off[2] + base], P[off[3] + base]);
                        acc = _mm256_add_pd(acc, _mm256_mul_pd(gv, xv));
                    }
                }
            }
            double* dst = dw + int64_t(co) * w_c + f;
            _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), acc));
        }
        for (; f < w_c; ++f) {
            const int ci = int(f / khw);
            const int kh = int((f % khw) / d.kw);
            const int kw = int(f % d.kw);
            const int64_t off = int64_t(ci) * hp * wp + int64_t(kh) * wp + kw;
            double acc = 0.0;
            for (int b = 0; b < d.batch; ++b) {
                const double* P = padded[size_t(b)].data();
                const double* gc = dout + b * out_chw + int64_t(co) * d.hout * d.wout;
                for (int oh = 0; oh < d.hout; ++oh) {
                    const int64_t row = int64_t(oh * d.stride) * wp;
                    for (int ow = 0; ow < d.wout; ++ow)
                        acc += gc[int64_t(oh) * d.wout + ow] * P[off + row + int64_t(ow) * d.stride];
                }
            }
            dw[int64_t(co) * w_c + f] += acc;
        }
    }
}

void relu_forward(double* y, const double* x, int64_t n) {
    const __m256d zero = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(y + i, _mm256_and_pd(mask, xv));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(double* dx, const double* x, const double* dy, int64_t n) {
    const __m256d zero = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
        const __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gv));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
}

void prelu_forward(double* y, const double* x, const double* slope, int b, int c, int64_t hw) {
    const __m256d zero = _mm256_setzero_pd();
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const double a = slope[ci];
            const __m256d av = _mm256_set1_pd(a);
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            int64_t i = 0;
            for (; i + 4 <= hw; i += 4) {
                const __m256d xv = _mm256_loadu_pd(x + base + i);
                const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
                const __m256d neg = _mm256_mul_pd(av, xv);
                _mm256_storeu_pd(y + base + i, _mm256_blendv_pd(neg, xv, mask));
            }
            for (; i < hw; ++i) {
                const double v = x[base + i];
                y[base + i] = v > 0.0 ? v : a * v;
            }
        }
    }
}

void prelu_backward(double* dx, double* dslope, const double* x, const double* dy, const double* slope,
                    int b, int c, int64_t hw) {
    const __m256d zero = _mm256_setzero_pd();
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const double a = slope[ci];
            const __m256d av = _mm256_set1_pd(a);
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            int64_t i = 0;
            for (; i + 4 <= hw; i += 4) {
                const __m256d xv = _mm256_loadu_pd(x + base + i);
                const __m256d gv = _mm256_loadu_pd(dy + base + i);
                const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
                const __m256d contrib = _mm256_blendv_pd(_mm256_mul_pd(av, gv), gv, mask);
                _mm256_storeu_pd(dx + base + i, _mm256_add_pd(_mm256_loadu_pd(dx + base + i), contrib));
            }
            for (; i < hw; ++i) {
                const double v = x[base + i];
                if (v > 0.0)
                    dx[base + i] += dy[base + i];
                else
                    dx[base + i] += a * dy[base + i];
            }
            // Slope gradient is a sequential reduction; keep the reference order.
            double ds = 0.0;
            for (int64_t k = 0; k < hw; ++k) {
                const double v = x[base + k];
                if (!(v > 0.0)) ds += v * dy[base + k];
            }
            dslope[ci] += ds;
        }
    }
}

void affine_channel(double* y, const double* x, const double* scale, const double* shift,
                    int b, int c, int64_t hw) {
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const __m256d sv = _mm256_set1_pd(scale[ci]);
            const __m256d tv = _mm256_set1_pd(shift[ci]);
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            int64_t i = 0;
            for (; i + 4 <= hw; i += 4) {
                const __m256d xv = _mm256_loadu_pd(x + base + i);
                _mm256_storeu_pd(y + base + i, _mm256_add_pd(_mm256_mul_pd(sv, xv), tv));
            }
            for (; i < hw; ++i) y[base + i] = scale[ci] * x[base + i] + shift[ci];
        }
    }
}

void bn_backward_elem(double* dx, const double* dy, const double* xhat, const double* s,
                      const double* m1, const double* m2, int b, int c, int64_t hw) {
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const __m256d sv = _mm256_set1_pd(s[ci]);
            const __m256d a1 = _mm256_set1_pd(m1[ci]);
            const __m256d a2 = _mm256_set1_pd(m2[ci]);
            const int64_t base = (int64_t(bi) * c + ci) * hw;
            int64_t i = 0;
            for (; i + 4 <= hw; i += 4) {
                const __m256d gv = _mm256_loadu_pd(dy + base + i);
                const __m256d hv = _mm256_loadu_pd(xhat + base + i);
                const __m256d t = _mm256_sub_pd(_mm256_sub_pd(gv, a1), _mm256_mul_pd(hv, a2));
                const __m256d dv = _mm256_add_pd(_mm256_loadu_pd(dx + base + i), _mm256_mul_pd(sv, t));
                _mm256_storeu_pd(dx + base + i, dv);
            }
            for (; i < hw; ++i)
                dx[base + i] += s[ci] * (dy[base + i] - m1[ci] - xhat[base + i] * m2[ci]);
        }
    }
}

void add(double* z, const double* x, const double* y, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void accumulate(double* y, const double* x, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void axpy(double* y, double a, const double* x, int64_t n) {
    const __m256d av = _mm256_set1_pd(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double* x, double a, int64_t n) {
    const __m256d av = _mm256_set1_pd(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void sgd_update(double* w, double* v, const double* g, double lr, double momentum, double wd,
                double gscale, int64_t n) {
    const __m256d gs = _mm256_set1_pd(gscale);
    const __m256d wdv = _mm256_set1_pd(wd);
    const __m256d mv = _mm256_set1_pd(momentum);
    const __m256d lrv = _mm256_set1_pd(lr);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d wv = _mm256_loadu_pd(w + i);
        const __m256d t = _mm256_add_pd(_mm256_mul_pd(_mm256_loadu_pd(g + i), gs), _mm256_mul_pd(wdv, wv));
        const __m256d vv = _mm256_add_pd(_mm256_mul_pd(mv, _mm256_loadu_pd(v + i)), t);
        _mm256_storeu_pd(v + i, vv);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(wv, _mm256_mul_pd(lrv, vv)));
    }
    for (; i < n; ++i) {
        const double t = g[i] * gscale + wd * w[i];
        v[i] = momentum * v[i] + t;
        w[i] -= lr * v[i];
    }
}

}  // namespace avx2

const Kernels& avx2_kernels() {
    static const Kernels k = {
        avx2::conv2d_forward,
        avx2::conv2d_backward_input,
        avx2::conv2d_backward_weight,
        avx2::relu_forward,
        avx2::relu_backward,
        avx2::prelu_forward,
        avx2::prelu_backward,
        avx2::affine_channel,
        avx2::bn_backward_elem,
        avx2::add,
        avx2::accumulate,
        avx2::axpy,
        avx2::scale,
        avx2::sgd_update,
    };
    return k;
}

}  // namespace supernas::simd
