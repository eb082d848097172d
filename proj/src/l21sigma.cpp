#include "fracstep/l21sigma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fracstep/special.hpp"

namespace fracstep {

FracOrder::FracOrder(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("fractional order must lie in (0, 1), got " +
                                    std::to_string(alpha));
    }
}

double rstar_residual(double r, double alpha) {
    const double b = 1.0 - 0.5 * alpha;
    const double s = 2.0 * b * r / (1.0 + alpha + b * r) + r / (1.0 + r);
    return 2.0 * std::sqrt(s) + 3.0 - 1.0 / (r * r * (1.0 + r));
}

namespace {

double rstar_residual_derivative(double r, double alpha) {
    const double b = 1.0 - 0.5 * alpha;
    const double c = 1.0 + alpha;
    const double s = 2.0 * b * r / (c + b * r) + r / (1.0 + r);
    const double ds = 2.0 * b * c / ((c + b * r) * (c + b * r)) + 1.0 / ((1.0 + r) * (1.0 + r));
    return ds / std::sqrt(s) + (2.0 + 3.0 * r) / (r * r * r * (1.0 + r) * (1.0 + r));
}

}  // namespace

double rstar(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("rstar: alpha must lie in [0, 1]");
    }
    double lo = 0.25;
    double hi = 0.5;
    if (!(rstar_residual(lo, alpha) < 0.0 && rstar_residual(hi, alpha) > 0.0)) {
        throw std::logic_error("rstar: root is not bracketed by (1/4, 1/2)");
    }
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (rstar_residual(mid, alpha) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double r = 0.5 * (lo + hi);
    const double polished = r - rstar_residual(r, alpha) / rstar_residual_derivative(r, alpha);
    if (polished > lo - 1e-12 && polished < hi + 1e-12) r = polished;
    return r;
}

double history_weight(double offset_time, double t, double alpha) {
    return omega(1.0 - alpha, offset_time - t);
}

namespace {

void check_level(const TimeMesh& mesh, int n) {
    if (n < 1 || n > mesh.steps()) {
        throw std::out_of_range("kernel level " + std::to_string(n) + " outside 1.." +
                                std::to_string(mesh.steps()));
    }
}

// Distance t_{n-theta} - t_k for k < n, formed without subtracting the
// offset node itself.
double gap_to_offset(const TimeMesh& mesh, double theta, int n, int k) {
    return (1.0 - theta) * mesh.tau(n) + (mesh.node(n - 1) - mesh.node(k));
}

}  // namespace

std::vector<double> coeff_a(const TimeMesh& mesh, FracOrder order, int n) {
    check_level(mesh, n);
    const double alpha = order.alpha();
    const double theta = order.theta();
    std::vector<double> a(static_cast<std::size_t>(n));
    const double tau_n = mesh.tau(n);
    a[0] = omega(2.0 - alpha, (1.0 - theta) * tau_n) / tau_n;
    for (int j = 1; j < n; ++j) {
        const int k = n - j;
        const double tau_k = mesh.tau(k);
        const double y = gap_to_offset(mesh, theta, n, k);
        a[static_cast<std::size_t>(j)] = omega_increment(2.0 - alpha, y, tau_k) / tau_k;
    }
    return a;
}

std::vector<double> coeff_zeta(const TimeMesh& mesh, FracOrder order, int n) {
    check_level(mesh, n);
    const double alpha = order.alpha();
    const double theta = order.theta();
    const double p = 1.0 - alpha;
    std::vector<double> zeta(static_cast<std::size_t>(n), 0.0);
    for (int j = 1; j < n; ++j) {
        const int k = n - j;
        const double tau_k = mesh.tau(k);
        const double y = gap_to_offset(mesh, theta, n, k);
        // (2/tau^2) * y^{p+1} * defect(tau/y) / Gamma(2-alpha)
        zeta[static_cast<std::size_t>(j)] =
            2.0 * omega(2.0 - alpha, y) * (y / tau_k) * (trapezoid_defect(p, tau_k / y) / tau_k);
    }
    return zeta;
}

std::vector<double> hat_kernels(std::span<const double> a, std::span<const double> zeta,
                                const TimeMesh& mesh, FracOrder order, int n) {
    check_level(mesh, n);
    const auto un = static_cast<std::size_t>(n);
    if (a.size() != un || zeta.size() != un) {
        throw std::invalid_argument("hat_kernels: coefficient vectors must have length n");
    }
    const double alpha = order.alpha();
    const double head = 2.0 * (1.0 - alpha) / (2.0 - alpha);
    std::vector<double> hat(un);
    if (n == 1) {
        hat[0] = head * a[0];
        return hat;
    }
    const double rn = mesh.ratio(n);
    hat[0] = head * a[0] + zeta[1] / (rn * (1.0 + rn));
    for (int k = 2; k <= n - 1; ++k) {
        const auto j = static_cast<std::size_t>(n - k);
        const double rk = mesh.ratio(k);
        const double rk1 = mesh.ratio(k + 1);
        hat[j] = a[j] + zeta[j + 1] / (rk * (1.0 + rk)) - zeta[j] / (1.0 + rk1);
    }
    hat[un - 1] = a[un - 1] - zeta[un - 1] / (1.0 + mesh.ratio(2));
    return hat;
}

std::vector<double> aux_kernels(std::span<const double> hat_a) {
    std::vector<double> A(hat_a.begin(), hat_a.end());
    if (!A.empty()) A[0] *= 2.0;
    return A;
}

KernelSet build_kernels(const TimeMesh& mesh, FracOrder order, int n) {
    KernelSet ks;
    ks.level = n;
    ks.a = coeff_a(mesh, order, n);
    ks.zeta = coeff_zeta(mesh, order, n);
    ks.hat_a = hat_kernels(ks.a, ks.zeta, mesh, order, n);
    ks.A = aux_kernels(ks.hat_a);
    return ks;
}

double local_coefficient(const KernelSet& kernels, FracOrder order) {
    return order.alpha() / (2.0 - order.alpha()) * kernels.a.at(0);
}

double frac_derivative(std::span<const double> history, const KernelSet& kernels,
                       FracOrder order) {
    const int n = kernels.level;
    if (history.size() != static_cast<std::size_t>(n) + 1) {
        throw std::invalid_argument("frac_derivative: history must hold v^0..v^n");
    }
    CompensatedSum sum;
    for (int k = 1; k <= n; ++k) {
        const double dv = history[static_cast<std::size_t>(k)] - history[static_cast<std::size_t>(k - 1)];
        sum.add(kernels.hat_a[static_cast<std::size_t>(n - k)] * dv);
    }
    const double dn = history[static_cast<std::size_t>(n)] - history[static_cast<std::size_t>(n - 1)];
    sum.add(local_coefficient(kernels, order) * dn);
    return sum.value();
}

std::vector<double> dgs_weights(std::span<const double> A) {
    const std::size_t n = A.size();
    std::vector<double> c(n);
    if (n == 0) return c;
    c[0] = A[n - 1];
    for (std::size_t j = 1; j < n; ++j) c[j] = A[n - j - 1] - A[n - j];
    return c;
}

namespace {

// sum_{j=0}^{m-1} c_j (sum_{l=j+1}^{m} w^l)^2 with w^l = diffs[l-1].
double weighted_tail_squares(std::span<const double> c, std::span<const double> diffs, std::size_t m) {
    CompensatedSum out;
    double tail = 0.0;
    std::vector<double> tails(m);
    for (std::size_t j = m; j-- > 0;) {
        tail += diffs[j];
        tails[j] = tail;  // sum_{l=j+1}^{m} w^l
    }
    for (std::size_t j = 0; j < m; ++j) out.add(c[j] * tails[j] * tails[j]);
    return out.value();
}

}  // namespace

double dgs_G(std::span<const double> A, std::span<const double> diffs) {
    if (A.size() != diffs.size()) {
        throw std::invalid_argument("dgs_G: kernel and difference lengths differ");
    }
    if (A.empty()) return 0.0;
    const std::vector<double> c = dgs_weights(A);
    return weighted_tail_squares(c, diffs, diffs.size());
}

DgsTerms dgs_functionals(std::span<const double> A_prev, std::span<const double> A_cur,
                         std::span<const double> diffs) {
    const std::size_t n = A_cur.size();
    if (diffs.size() != n || A_prev.size() + 1 != n) {
        throw std::invalid_argument("dgs_functionals: need |A_prev| = n-1 and |diffs| = |A_cur| = n");
    }
    DgsTerms out;
    out.G = dgs_G(A_cur, diffs);
    if (n >= 2) {
        const std::vector<double> c_prev = dgs_weights(A_prev);
        const std::vector<double> c_cur = dgs_weights(A_cur);
        std::vector<double> c(n - 1);
        for (std::size_t j = 0; j + 1 < n; ++j) c[j] = c_prev[j] - c_cur[j];
        out.R = weighted_tail_squares(c, diffs, n - 1);
    }
    return out;
}

}  // namespace fracstep

namespace fracstep {

DgsCheck dgs_identity_check(const TimeMesh& mesh, FracOrder order, std::span<const double> values) {
    const int N = static_cast<int>(values.size()) - 1;
    if (N < 1 || N > mesh.steps()) throw std::invalid_argument("dgs check: need v^0..v^N with N <= mesh steps");
    DgsCheck out;
    std::vector<double> diffs;
    std::vector<double> A_prev;
    for (int n = 1; n <= N; ++n) {
        const KernelSet ker = build_kernels(mesh, order, n);
        diffs.push_back(values[static_cast<std::size_t>(n)] - values[static_cast<std::size_t>(n - 1)]);
        const double w = diffs.back();
        const double lhs = 2.0 * w * frac_derivative(values.first(static_cast<std::size_t>(n) + 1), ker, order);
        const DgsTerms cur = dgs_functionals(A_prev, ker.A, diffs);
        const double G_prev = dgs_G(A_prev, std::span<const double>(diffs).first(diffs.size() - 1));
        const double local = 2.0 * order.alpha() / (2.0 - order.alpha()) * ker.a[0] * w * w;
        const double rhs = cur.G - G_prev + cur.R + local;
        const double scale = std::max({std::abs(lhs), std::abs(cur.G) + std::abs(G_prev) + std::abs(cur.R) + local,
                                       std::numeric_limits<double>::min()});
        out.max_residual = std::max(out.max_residual, std::abs(lhs - rhs) / scale);
        out.min_G = std::min(out.min_G, cur.G);
        out.min_R = std::min(out.min_R, cur.R);
        A_prev = ker.A;
    }
    return out;
}

}  // namespace fracstep
