#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "fracstep/l21sigma.hpp"
#include "fracstep/special.hpp"
#include "oracles.hpp"

using namespace fracstep;

namespace {

// mpmath, 30 digits
constexpr double kA0 = 0.977205023805839843;        // omega_{1.5}(0.75)
constexpr double kHatA0 = 0.651470015870559895;     // (2/3) kA0
constexpr double kRstar0 = 0.386473124375068983;    // alpha = 0
constexpr double kRstarHalf = 0.396019302955281324; // alpha = 0.5
constexpr double kRstar1 = 0.403652907420005311;    // alpha = 1

std::vector<double> random_values(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1);
    for (double& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("special functions") {
    CHECK(omega(1.0, 3.0) == doctest::Approx(1.0));
    CHECK(omega(1.5, 0.75) == doctest::Approx(kA0).epsilon(1e-15));
    CHECK(omega(2.0, 0.0) == 0.0);
    CHECK(std::isinf(omega(0.5, 0.0)));
    const double y = 2.0, d = 1e-9;
    CHECK(omega_increment(1.7, y, d) == doctest::Approx((0.7 * std::pow(y, -0.3) / std::tgamma(1.7)) * d).epsilon(1e-8));
    // series and direct branches agree at the switch; positive for u > 0
    for (double p : {0.1, 0.5, 0.9}) {
        const double lo = trapezoid_defect(p, 0.5 - 1e-12), hi = trapezoid_defect(p, 0.5 + 1e-12);
        CHECK(lo == doctest::Approx(hi).epsilon(1e-10));
        CHECK(trapezoid_defect(p, 1e-4) > 0.0);
        CHECK(trapezoid_defect(p, 3.0) > 0.0);
    }
    std::vector<double> xs{1e16, 1.0, -1e16, 1.0};
    CHECK(compensated_sum(xs) == 2.0);
}

TEST_CASE("r* root") {
    CHECK(rstar(0.0) == doctest::Approx(kRstar0).epsilon(1e-11));
    CHECK(rstar(1.0) == doctest::Approx(kRstar1).epsilon(1e-11));
    CHECK(rstar(0.5) == doctest::Approx(kRstarHalf).epsilon(1e-11));
    CHECK(std::abs(rstar(1e-8) - 0.3865) <= 5e-5);
    CHECK(std::abs(rstar(1.0 - 1e-8) - 0.4037) <= 5e-5);
    double prev = 0.0;
    for (int i = 1; i <= 19; ++i) {
        const double a = 0.05 * i;
        const double r = rstar(a);
        CHECK(r > prev);
        CHECK(std::abs(rstar_residual(r, a)) <= 1e-11);
        prev = r;
    }
    CHECK_THROWS(rstar(1.5));
}

TEST_CASE("first-level coefficients") {
    const std::vector<double> one{1.0};
    const TimeMesh mesh = TimeMesh::from_steps(one);
    const KernelSet k = build_kernels(mesh, FracOrder(0.5), 1);
    CHECK(k.a[0] == doctest::Approx(kA0).epsilon(1e-14));
    CHECK(k.hat_a[0] == doctest::Approx(kHatA0).epsilon(1e-14));
    REQUIRE(k.A.size() == 1);
    CHECK(k.A[0] == 2.0 * k.hat_a[0]);
    CHECK_THROWS(FracOrder(0.0));
    CHECK_THROWS(FracOrder(1.0));
}

TEST_CASE("closed forms against quadrature") {
    double worst = 0.0;
    for (double alpha : {0.1, 0.5, 0.9}) {
        const FracOrder order(alpha);
        for (std::uint64_t s = 0; s < 10; ++s) {
            const TimeMesh mesh = random_admissible_mesh(12, rstar(alpha), 4.0, 100 + s);
            for (int n = 1; n <= 12; ++n) {
                const auto a = coeff_a(mesh, order, n);
                const auto z = coeff_zeta(mesh, order, n);
                const auto ao = oracle::a(mesh, alpha, n);
                const auto zo = oracle::zeta(mesh, alpha, n);
                CHECK(z[0] == 0.0);
                for (int j = 0; j < n; ++j) {
                    worst = std::max(worst, oracle::rel(a[j], ao[j]));
                    if (j > 0) worst = std::max(worst, oracle::rel(z[j], zo[j]));
                }
            }
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("coefficients near alpha = 1") {
    const double alpha = 1.0 - 1e-6;
    const TimeMesh mesh = random_admissible_mesh(10, rstar(alpha), 3.0, 5);
    for (int n = 1; n <= 10; ++n) {
        const KernelSet k = build_kernels(mesh, FracOrder(alpha), n);
        CHECK(k.a[0] * mesh.tau(n) == doctest::Approx(1.0).epsilon(1e-5));
        // everything except the local weight is O(1 - alpha) on the 1/tau_n scale
        const double tau = mesh.tau(n);
        for (int j = 1; j < n; ++j) {
            CHECK(k.a[j] * tau <= 1e-4);
            CHECK(k.zeta[j] * tau <= 1e-4);
        }
        for (double h : k.hat_a) CHECK(h * tau <= 1e-4);
    }
}

TEST_CASE("zeta_1 bound") {
    for (double alpha : {0.2, 0.6, 0.9}) {
        const double theta = 0.5 * alpha;
        const TimeMesh mesh = random_admissible_mesh(15, rstar(alpha), 4.0, 77);
        for (int n = 2; n <= 15; ++n) {
            const auto z = coeff_zeta(mesh, FracOrder(alpha), n);
            const double w = history_weight(mesh.offset_node(n, theta), mesh.node(n - 1), alpha);
            CHECK(z[1] <= alpha / (6.0 * (1.0 - theta) * mesh.ratio(n)) * w * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("split derivative equals the interpolant quadrature") {
    std::mt19937_64 rng(9);
    for (double alpha : {0.1, 0.5, 0.9}) {
        const FracOrder order(alpha);
        for (std::uint64_t s = 0; s < 5; ++s) {
            const TimeMesh mesh = random_admissible_mesh(10, rstar(alpha), 4.0, 300 + s);
            const std::vector<double> v = random_values(rng, 10);
            for (int n = 1; n <= 10; ++n) {
                const KernelSet k = build_kernels(mesh, order, n);
                const double d = frac_derivative(std::span<const double>(v).first(n + 1), k, order);
                const auto ref = oracle::interpolant_derivative(mesh, alpha, v, n);
                CHECK(std::abs(d - ref.value) <= 1e-12 * std::max(std::abs(ref.value), ref.scale));
            }
        }
    }
}

TEST_CASE("discrete derivative limits") {
    const TimeMesh mesh = random_admissible_mesh(8, 0.4, 3.0, 4);
    const std::vector<double> flat(9, 0.7);
    for (int n = 1; n <= 8; ++n) {
        const KernelSet k = build_kernels(mesh, FracOrder(0.4), n);
        CHECK(frac_derivative(std::span<const double>(flat).first(n + 1), k, FracOrder(0.4)) == 0.0);
    }

    // v = t: every interpolant is exact
    std::vector<double> errors;
    for (int N : {16, 32, 64}) {
        const std::vector<double> steps(static_cast<std::size_t>(N), 1.0 / N);
        const TimeMesh m = TimeMesh::from_steps(steps);
        std::vector<double> v(static_cast<std::size_t>(N) + 1);
        for (int k = 0; k <= N; ++k) v[k] = m.node(k);
        const FracOrder order(0.5);
        const KernelSet k = build_kernels(m, order, N);
        const double exact = omega(1.5, m.offset_node(N, 0.25));
        errors.push_back(std::abs(frac_derivative(v, k, order) - exact));
    }
    CHECK(errors[0] < 1e-12);  // linear data is reproduced exactly
    CHECK(errors[2] < 1e-12);

    // alpha -> 1 approaches the Crank-Nicolson difference quotient
    const double alpha = 1.0 - 1e-6;
    std::mt19937_64 rng(2);
    const std::vector<double> v = random_values(rng, 8);
    for (int n = 1; n <= 8; ++n) {
        const KernelSet k = build_kernels(mesh, FracOrder(alpha), n);
        const double d = frac_derivative(std::span<const double>(v).first(n + 1), k, FracOrder(alpha));
        const double cn = (v[n] - v[n - 1]) / mesh.tau(n);
        CHECK(std::abs(d - cn) <= 1e-4 * std::abs(cn));
    }
}

TEST_CASE("quadratics are reproduced exactly, cubics at order 3 - alpha") {
    const FracOrder order(0.5);
    std::vector<double> errors;
    for (int N : {16, 32, 64, 128}) {
        const std::vector<double> steps(static_cast<std::size_t>(N), 1.0 / N);
        const TimeMesh m = TimeMesh::from_steps(steps);
        const KernelSet k = build_kernels(m, order, N);
        const double T = m.offset_node(N, 0.25);
        std::vector<double> sq(static_cast<std::size_t>(N) + 1), cu(sq.size());
        for (int j = 0; j <= N; ++j) {
            sq[j] = m.node(j) * m.node(j);
            cu[j] = sq[j] * m.node(j);
        }
        const double exact_sq = 2.0 * omega(2.5, T);
        CHECK(std::abs(frac_derivative(sq, k, order) - exact_sq) <= 1e-12 * exact_sq);
        errors.push_back(std::abs(frac_derivative(cu, k, order) - 6.0 * omega(3.5, T)));
    }
    for (std::size_t i = 1; i < errors.size(); ++i) {
        MESSAGE("cubic order " << std::log2(errors[i - 1] / errors[i]));
        CHECK(std::log2(errors[i - 1] / errors[i]) == doctest::Approx(2.5).epsilon(0.1));
    }
}

TEST_CASE("discrete gradient structure") {
    CHECK(dgs_G({}, {}) == 0.0);
    std::mt19937_64 rng(1);
    for (double alpha : {0.1, 0.5, 0.9}) {
        const FracOrder order(alpha);
        const std::vector<double> uni(5, 0.2);
        const DgsCheck u = dgs_identity_check(TimeMesh::from_steps(uni), order, random_values(rng, 5));
        CHECK(u.max_residual <= 1e-12);
        for (std::uint64_t s = 0; s < 20; ++s) {
            const TimeMesh mesh = random_admissible_mesh(10, rstar(alpha), 4.0, 500 + s);
            const DgsCheck c = dgs_identity_check(mesh, order, random_values(rng, 10));
            CHECK(c.max_residual <= 1e-11);
            CHECK(c.min_G >= 0.0);
            CHECK(c.min_R >= 0.0);
        }
        const TimeMesh mesh = random_admissible_mesh(6, rstar(alpha), 4.0, 1);
        const KernelSet k5 = build_kernels(mesh, order, 5), k6 = build_kernels(mesh, order, 6);
        const std::vector<double> zeros(6, 0.0);
        const DgsTerms t = dgs_functionals(k5.A, k6.A, zeros);
        CHECK(t.G == 0.0);
        CHECK(t.R == 0.0);
    }
    const std::vector<double> A{1.0, 0.5};
    const std::vector<double> w{1.0};
    CHECK_THROWS(dgs_functionals(A, A, w));
}
