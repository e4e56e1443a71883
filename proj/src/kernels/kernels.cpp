// SPDX-License-Identifier: Apache-2.0
#include "supernas/kernels.hpp"

#include <cstdlib>

#include "supernas/common.hpp"

namespace supernas::simd {

ConvDims conv_dims(int batch, int cin, int h, int w, int cout, int kh, int kw, int stride, int pad) {
    if (kh != 1 && kh != 3) throw ShapeError("conv2d: kernel height must be 1 or 3");
    if (kw != 1 && kw != 3) throw ShapeError("conv2d: kernel width must be 1 or 3");
    if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
    if (pad < 0) throw ShapeError("conv2d: negative padding");
    ConvDims d;
    d.batch = batch;
    d.cin = cin;
    d.h = h;
    d.w = w;
    d.cout = cout;
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    d.pad = pad;
    d.hout = (h + 2 * pad - kh) / stride + 1;
    d.wout = (w + 2 * pad - kw) / stride + 1;
    if (d.hout <= 0 || d.wout <= 0) throw ShapeError("conv2d: empty output for given input/kernel/stride");
    return d;
}

bool avx2_compiled() {
#ifdef SUPERNAS_HAVE_AVX2
    return true;
#else
    return false;
#endif
}

bool avx2_supported() {
#ifdef SUPERNAS_HAVE_AVX2
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

#ifndef SUPERNAS_HAVE_AVX2
const Kernels& avx2_kernels() {
    throw ValueError("avx2 kernels not compiled in this build");
}
#endif

namespace {

Backend g_backend = [] {
    Backend b = avx2_supported() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("SUPERNAS_SIMD")) {
        const std::string v(env);
        if (v == "scalar") b = Backend::scalar;
        else if (v == "avx2" && avx2_supported()) b = Backend::avx2;
    }
    return b;
}();

}  // namespace

const Kernels& active() {
    return g_backend == Backend::avx2 ? avx2_kernels() : scalar_kernels();
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported())
        throw ValueError("avx2 backend requested but not supported on this host");
    g_backend = b;
}

std::string backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace supernas::simd
