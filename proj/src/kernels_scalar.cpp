#include "camox/kernels.hpp"

#include <cmath>

namespace camox::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double sumabs_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void affine_scalar(const double* x, double mean, double inv_std, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mean) * inv_std;
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_scalar(const double* pre, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = pre[i] > 0.0 ? dy[i] : 0.0;
}

void adam_update_scalar(double* p, double* m, double* v, const double* g, std::size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double inv_bc1, double inv_bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double m_hat = m[i] * inv_bc1;
        const double v_hat = v[i] * inv_bc2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void rgb_sums_scalar(const std::uint8_t* rgb, std::size_t n_pixels, std::uint64_t sums[3]) {
    std::uint64_t r = 0, g = 0, b = 0;
    for (std::size_t i = 0; i < n_pixels; ++i) {
        r += rgb[3 * i + 0];
        g += rgb[3 * i + 1];
        b += rgb[3 * i + 2];
    }
    sums[0] = r;
    sums[1] = g;
    sums[2] = b;
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend k{
        "scalar",
        dot_scalar,  sum_scalar,   sumsq_scalar,     sumabs_scalar,
        axpy_scalar, scale_scalar, affine_scalar,    relu_scalar,
        relu_grad_scalar, adam_update_scalar, rgb_sums_scalar,
    };
    return k;
}

}  // namespace camox::kern
