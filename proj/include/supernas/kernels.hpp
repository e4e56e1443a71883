// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace supernas::simd {

enum class Backend { scalar, avx2 };

struct ConvDims {
    int batch = 0;
    int cin = 0;
    int h = 0;
    int w = 0;
    int cout = 0;
    int kh = 0;
    int kw = 0;
    int stride = 1;
    int pad = 0;
    int hout = 0;
    int wout = 0;
};

ConvDims conv_dims(int batch, int cin, int h, int w, int cout, int kh, int kw, int stride, int pad);

/// One kernel table per backend. The AVX2 entries are constructed to be
/// bit-identical to the scalar references: every vector lane performs the
/// same operations in the same order as the scalar loop, and mul/add are
/// never contracted into fma on either path.
struct Kernels {
    // out[b,co,oh,ow] = sum_{ci,kh,kw} w[co,ci,kh,kw] * in[b,ci,oh*s+kh-p,ow*s+kw-p]
    void (*conv2d_forward)(double* out, const double* in, const double* w, const ConvDims& d);
    // din += correlation of dout with the transposed kernel (accumulating)
    void (*conv2d_backward_input)(double* din, const double* dout, const double* w, const ConvDims& d);
    // dw += reduction of dout against in (accumulating)
    void (*conv2d_backward_weight)(double* dw, const double* dout, const double* in, const ConvDims& d);

    void (*relu_forward)(double* y, const double* x, int64_t n);
    void (*relu_backward)(double* dx, const double* x, const double* dy, int64_t n);  // dx += mask*dy
    void (*prelu_forward)(double* y, const double* x, const double* slope, int b, int c, int64_t hw);
    // dx += (x>0 ? dy : a_c*dy); dslope[c] += sum over x<=0 of x*dy
    void (*prelu_backward)(double* dx, double* dslope, const double* x, const double* dy, const double* slope,
                           int b, int c, int64_t hw);

    // y[i] = scale_c * x[i] + shift_c per channel row (batchnorm affine form)
    void (*affine_channel)(double* y, const double* x, const double* scale, const double* shift,
                           int b, int c, int64_t hw);
    // dx += s_c * (dy - m1_c - xhat*m2_c) (batchnorm input gradient, elementwise part)
    void (*bn_backward_elem)(double* dx, const double* dy, const double* xhat, const double* s,
                             const double* m1, const double* m2, int b, int c, int64_t hw);

    void (*add)(double* z, const double* x, const double* y, int64_t n);
    void (*accumulate)(double* y, const double* x, int64_t n);        // y += x
    void (*axpy)(double* y, double a, const double* x, int64_t n);    // y += a*x
    void (*scale)(double* x, double a, int64_t n);
    // t = g*gscale + wd*w; v = momentum*v + t; w -= lr*v
    void (*sgd_update)(double* w, double* v, const double* g, double lr, double momentum, double wd,
                       double gscale, int64_t n);
};

const Kernels& scalar_kernels();
bool avx2_compiled();
bool avx2_supported();
const Kernels& avx2_kernels();  // valid only if avx2_compiled() && avx2_supported()

/// Active table. Defaults to the widest supported backend; the environment
/// variable SUPERNAS_SIMD=scalar|avx2 overrides, as does set_backend().
const Kernels& active();
Backend active_backend();
void set_backend(Backend b);
std::string backend_name(Backend b);

}  // namespace supernas::simd
