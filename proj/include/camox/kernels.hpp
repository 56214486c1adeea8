#pragma once
// Low-level arithmetic kernels: scalar reference implementations plus an
// AVX2 backend selected at runtime. Every backend computes the same result;
// elementwise kernels are bit-identical across backends, reductions agree
// to rounding (different summation order) and are equivalence-tested.

#include <cstddef>
#include <cstdint>
#include <string>

namespace camox::kern {

struct Backend {
    const char* name;

    // reductions
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*sumsq)(const double* x, std::size_t n);
    double (*sumabs)(const double* x, std::size_t n);

    // elementwise (no FMA so all backends round identically)
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*scale)(double a, double* x, std::size_t n);
    // y = (x - mean) * inv_std
    void (*affine)(const double* x, double mean, double inv_std, double* y, std::size_t n);
    void (*relu)(const double* x, double* y, std::size_t n);
    // dx = dy where pre > 0, else 0
    void (*relu_grad)(const double* pre, const double* dy, double* dx, std::size_t n);
    // one Adam update over a contiguous parameter block; inv_bc1/inv_bc2 are
    // the 1/(1-beta^t) bias corrections for the current step
    void (*adam_update)(double* p, double* m, double* v, const double* g, std::size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double inv_bc1, double inv_bc2);

    // per-channel sums of interleaved RGB24 pixel data (exact integer result)
    void (*rgb_sums)(const std::uint8_t* rgb, std::size_t n_pixels, std::uint64_t sums[3]);
};

// Scalar backend is always available and is the reference for equivalence tests.
const Backend& scalar_backend();

// Best backend for this CPU, resolved once. Honors CAMOX_SIMD=scalar|avx2
// (falls back to scalar when the requested ISA is unsupported).
const Backend& active_backend();

bool cpu_has_avx2();

// nullptr when compiled out (non-x86 build)
const Backend* avx2_backend();

}  // namespace camox::kern
