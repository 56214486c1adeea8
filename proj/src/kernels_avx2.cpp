// AVX2+FMA backend. Compiled with -mavx2 -mfma -ffp-contract=off; callers
// must check cpu_has_avx2() first (dispatch in kernels.cpp does).
//
// Elementwise kernels deliberately avoid FMA and mirror the scalar
// expression trees op for op, so scalar and AVX2 results are bit-identical.
// Reductions use FMA and lane-parallel partial sums, so they differ from
// scalar by rounding only.

#include "camox/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
#define CAMOX_X86 1
#else
#define CAMOX_X86 0
#endif

#if CAMOX_X86

#include <immintrin.h>

#include <cmath>

namespace camox::kern {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc0 = _mm256_fmadd_pd(v, v, acc0);
    }
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double sumabs_avx2(const double* x, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(x + i)));
    }
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    }
    for (; i < n; ++i) x[i] *= a;
}

void affine_avx2(const double* x, double mean, double inv_std, double* y, std::size_t n) {
    const __m256d vm = _mm256_set1_pd(mean);
    const __m256d vs = _mm256_set1_pd(inv_std);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
        _mm256_storeu_pd(y + i, _mm256_mul_pd(v, vs));
    }
    for (; i < n; ++i) y[i] = (x[i] - mean) * inv_std;
}

void relu_avx2(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_avx2(const double* pre, const double* dy, double* dx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
    }
    for (; i < n; ++i) dx[i] = pre[i] > 0.0 ? dy[i] : 0.0;
}

void adam_update_avx2(double* p, double* m, double* v, const double* g, std::size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double inv_bc1, double inv_bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vcb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vcb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vbc1 = _mm256_set1_pd(inv_bc1);
    const __m256d vbc2 = _mm256_set1_pd(inv_bc2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                   _mm256_mul_pd(vcb1, gi));
        __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                   _mm256_mul_pd(vcb2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        __m256d m_hat = _mm256_mul_pd(mi, vbc1);
        __m256d v_hat = _mm256_mul_pd(vi, vbc2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), veps);
        __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, m_hat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double m_hat = m[i] * inv_bc1;
        const double v_hat = v[i] * inv_bc2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

// Channel mask for interleaved RGB bytes: mask_mod3[k] selects bytes at
// positions == k (mod 3) within a 32-byte lane group.
alignas(32) constexpr std::uint8_t kMod3Mask[3][32] = {
    {255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255,
     0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0},
    {0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0,
     255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255},
    {0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0,
     0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0},
};

void rgb_sums_avx2(const std::uint8_t* rgb, std::size_t n_pixels, std::uint64_t sums[3]) {
    const __m256i zero = _mm256_setzero_si256();
    const __m256i masks[3] = {
        _mm256_load_si256(reinterpret_cast<const __m256i*>(kMod3Mask[0])),
        _mm256_load_si256(reinterpret_cast<const __m256i*>(kMod3Mask[1])),
        _mm256_load_si256(reinterpret_cast<const __m256i*>(kMod3Mask[2])),
    };
    __m256i acc[3] = {zero, zero, zero};

    // 96 bytes = 32 pixels per block; three 32-byte loads whose channel
    // phase shifts by 32 mod 3 = 2 per load.
    const std::size_t n_blocks = n_pixels / 32;
    const std::uint8_t* p = rgb;
    for (std::size_t blk = 0; blk < n_blocks; ++blk, p += 96) {
        for (int load = 0; load < 3; ++load) {
            const __m256i bytes =
                _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + 32 * load));
            for (int c = 0; c < 3; ++c) {
                const int k = (c + 2 * (3 - load)) % 3;  // (c - 2*load) mod 3
                const __m256i sel = _mm256_and_si256(bytes, masks[k]);
                acc[c] = _mm256_add_epi64(acc[c], _mm256_sad_epu8(sel, zero));
            }
        }
    }

    alignas(32) std::uint64_t lanes[4];
    for (int c = 0; c < 3; ++c) {
        _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc[c]);
        sums[c] = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    }
    for (std::size_t i = n_blocks * 32; i < n_pixels; ++i) {
        sums[0] += rgb[3 * i + 0];
        sums[1] += rgb[3 * i + 1];
        sums[2] += rgb[3 * i + 2];
    }
}

}  // namespace

const Backend* avx2_backend() {
    static const Backend k{
        "avx2",
        dot_avx2,  sum_avx2,   sumsq_avx2,     sumabs_avx2,
        axpy_avx2, scale_avx2, affine_avx2,    relu_avx2,
        relu_grad_avx2, adam_update_avx2, rgb_sums_avx2,
    };
    return &k;
}

}  // namespace camox::kern

#else  // !CAMOX_X86

namespace camox::kern {
const Backend* avx2_backend() { return nullptr; }
}  // namespace camox::kern

#endif
