#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "camox/kernels.hpp"
#include "camox/rng.hpp"

using namespace camox;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 9, 31, 32, 33, 84, 90, 96, 100, 1000, 2689};

}  // namespace

TEST_CASE("scalar kernels: basic identities") {
    const auto& k = kern::scalar_backend();
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{4.0, -5.0, 6.0};
    CHECK(k.dot(a.data(), b.data(), 3) == doctest::Approx(1 * 4 - 2 * 5 + 3 * 6));
    CHECK(k.sum(a.data(), 3) == 6.0);
    CHECK(k.sumsq(a.data(), 3) == 14.0);
    CHECK(k.sumabs(b.data(), 3) == 15.0);

    std::vector<double> y{1.0, 1.0, 1.0};
    k.axpy(2.0, a.data(), y.data(), 3);
    CHECK(y == std::vector<double>{3.0, 5.0, 7.0});

    std::vector<double> relu_out(3);
    const std::vector<double> pre{-1.0, 0.0, 2.0};
    k.relu(pre.data(), relu_out.data(), 3);
    CHECK(relu_out == std::vector<double>{0.0, 0.0, 2.0});

    std::vector<double> grad_out(3);
    const std::vector<double> dy{5.0, 5.0, 5.0};
    k.relu_grad(pre.data(), dy.data(), grad_out.data(), 3);
    CHECK(grad_out == std::vector<double>{0.0, 0.0, 5.0});
}

TEST_CASE("adam first step moves by about -lr * sign(gradient)") {
    const auto& k = kern::scalar_backend();
    std::vector<double> p{0.0, 1.0}, m{0.0, 0.0}, v{0.0, 0.0};
    const std::vector<double> g{3.0, -0.25};
    const double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    // on the first step the bias corrections make m_hat = g and v_hat = g^2
    k.adam_update(p.data(), m.data(), v.data(), g.data(), 2, lr, beta1, beta2, eps,
                  1.0 / (1.0 - beta1), 1.0 / (1.0 - beta2));
    CHECK(p[0] == doctest::Approx(-lr).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(1.0 + lr).epsilon(1e-6));
}

TEST_CASE("rgb channel sums match a direct per-byte loop") {
    Rng rng(7);
    const auto& k = kern::active_backend();
    for (std::size_t n_pixels : {std::size_t(0), std::size_t(1), std::size_t(31), std::size_t(32),
                                 std::size_t(33), std::size_t(95), std::size_t(96), std::size_t(97),
                                 std::size_t(1000), std::size_t(176 * 144)}) {
        std::vector<std::uint8_t> buf(n_pixels * 3);
        for (auto& b : buf) b = std::uint8_t(rng.below(256));
        std::uint64_t expect[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n_pixels; ++i) {
            expect[0] += buf[3 * i];
            expect[1] += buf[3 * i + 1];
            expect[2] += buf[3 * i + 2];
        }
        std::uint64_t got[3];
        k.rgb_sums(buf.data(), n_pixels, got);
        CHECK(got[0] == expect[0]);
        CHECK(got[1] == expect[1]);
        CHECK(got[2] == expect[2]);
    }
}

TEST_CASE("avx2 backend matches scalar") {
    const kern::Backend* avx2 = kern::avx2_backend();
    if (avx2 == nullptr || !kern::cpu_has_avx2()) {
        MESSAGE("AVX2 unavailable; dispatch falls back to scalar");
        CHECK(std::strcmp(kern::active_backend().name, "scalar") == 0);
        return;
    }
    const auto& sc = kern::scalar_backend();
    Rng rng(42);

    SUBCASE("reductions agree to rounding") {
        for (std::size_t n : kSizes) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            const double tol = 1e-12 * double(n + 1);
            CHECK(std::fabs(sc.dot(a.data(), b.data(), n) - avx2->dot(a.data(), b.data(), n)) <=
                  tol);
            CHECK(std::fabs(sc.sum(a.data(), n) - avx2->sum(a.data(), n)) <= tol);
            CHECK(std::fabs(sc.sumsq(a.data(), n) - avx2->sumsq(a.data(), n)) <= tol);
            CHECK(std::fabs(sc.sumabs(a.data(), n) - avx2->sumabs(a.data(), n)) <= tol);
        }
    }

    SUBCASE("elementwise kernels are bit-identical") {
        for (std::size_t n : kSizes) {
            const auto x = random_vec(rng, n);
            const auto dy = random_vec(rng, n);

            auto y1 = random_vec(rng, n);
            auto y2 = y1;
            sc.axpy(1.7, x.data(), y1.data(), n);
            avx2->axpy(1.7, x.data(), y2.data(), n);
            CHECK(bitwise_equal(y1, y2));

            auto s1 = x, s2 = x;
            sc.scale(-0.3, s1.data(), n);
            avx2->scale(-0.3, s2.data(), n);
            CHECK(bitwise_equal(s1, s2));

            std::vector<double> a1(n), a2(n);
            sc.affine(x.data(), 0.77, 1.9, a1.data(), n);
            avx2->affine(x.data(), 0.77, 1.9, a2.data(), n);
            CHECK(bitwise_equal(a1, a2));

            std::vector<double> r1(n), r2(n);
            sc.relu(x.data(), r1.data(), n);
            avx2->relu(x.data(), r2.data(), n);
            CHECK(bitwise_equal(r1, r2));

            std::vector<double> g1(n), g2(n);
            sc.relu_grad(x.data(), dy.data(), g1.data(), n);
            avx2->relu_grad(x.data(), dy.data(), g2.data(), n);
            CHECK(bitwise_equal(g1, g2));
        }
    }

    SUBCASE("adam updates are bit-identical") {
        for (std::size_t n : kSizes) {
            const auto g = random_vec(rng, n);
            auto p1 = random_vec(rng, n);
            auto p2 = p1;
            auto m1 = random_vec(rng, n, 0.0, 0.1), m2 = m1;
            auto v1 = random_vec(rng, n, 0.0, 0.1), v2 = v1;
            sc.adam_update(p1.data(), m1.data(), v1.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                           1.2, 1.05);
            avx2->adam_update(p2.data(), m2.data(), v2.data(), g.data(), n, 1e-3, 0.9, 0.999,
                              1e-8, 1.2, 1.05);
            CHECK(bitwise_equal(p1, p2));
            CHECK(bitwise_equal(m1, m2));
            CHECK(bitwise_equal(v1, v2));
        }
    }

    SUBCASE("rgb sums are exactly equal") {
        for (std::size_t n_pixels : {std::size_t(1), std::size_t(33), std::size_t(96),
                                     std::size_t(2000), std::size_t(176 * 144)}) {
            std::vector<std::uint8_t> buf(n_pixels * 3);
            for (auto& b : buf) b = std::uint8_t(rng.below(256));
            std::uint64_t s1[3], s2[3];
            sc.rgb_sums(buf.data(), n_pixels, s1);
            avx2->rgb_sums(buf.data(), n_pixels, s2);
            CHECK(s1[0] == s2[0]);
            CHECK(s1[1] == s2[1]);
            CHECK(s1[2] == s2[2]);
        }
    }
}
