#pragma once

#include <limits>
#include <span>
#include <vector>

#include "fracstep/fracmesh.hpp"

namespace fracstep {

/// Caputo order alpha in (0, 1) with offset theta = alpha / 2.
class FracOrder {
public:
    explicit FracOrder(double alpha);
    double alpha() const { return alpha_; }
    double theta() const { return 0.5 * alpha_; }

private:
    double alpha_;
};

/// Ratio function h(r, alpha); its root in (1/4, 1/2) is r*(alpha).
double rstar_residual(double r, double alpha);

/// Minimal admissible step ratio r*(alpha). alpha in [0, 1]; the endpoints
/// are accepted as limits.
double rstar(double alpha);

/// Weight w'_n(t) = omega_{1-alpha}(t_{n-theta} - t).
double history_weight(double offset_time, double t, double alpha);

/// Coefficients of the L2-1sigma formula at one level n.
///
/// Every vector is indexed by the lag j = n - k, so entry j belongs to the
/// interval [t_{k-1}, t_k] with k = n - j, j = 0..n-1. zeta[0] is not part
/// of the formula (the last interval uses a linear interpolant) and is 0.
struct KernelSet {
    int level = 0;
    std::vector<double> a;
    std::vector<double> zeta;
    std::vector<double> hat_a;
    std::vector<double> A;
};

/// a^{(n)}_{n-k} for k = 1..n (indexed by lag), closed form.
std::vector<double> coeff_a(const TimeMesh& mesh, FracOrder order, int n);
/// zeta^{(n)}_{n-k} for k = 1..n-1 (lag >= 1), closed form; entry 0 is 0.
std::vector<double> coeff_zeta(const TimeMesh& mesh, FracOrder order, int n);
/// Nonlocal kernels of the local-nonlocal splitting.
std::vector<double> hat_kernels(std::span<const double> a, std::span<const double> zeta,
                                const TimeMesh& mesh, FracOrder order, int n);
/// A_0 = 2 hat_a_0, A_j = hat_a_j otherwise.
std::vector<double> aux_kernels(std::span<const double> hat_a);

KernelSet build_kernels(const TimeMesh& mesh, FracOrder order, int n);

/// Coefficient of the local Crank-Nicolson-like term, alpha/(2-alpha) a_0.
double local_coefficient(const KernelSet& kernels, FracOrder order);

/// Discrete Caputo derivative at t_{n-theta} from level values v^0..v^n,
/// through the split form. Ascending-k compensated summation.
double frac_derivative(std::span<const double> history, const KernelSet& kernels,
                       FracOrder order);

struct DgsTerms {
    double G = 0.0;
    double R = 0.0;
};

/// Weights c_j of G[w^n] = sum_{j=0}^{n-1} c_j (sum_{l=j+1}^n w^l)^2 built
/// from level-n auxiliary kernels: c_0 = A_{n-1}, c_j = A_{n-j-1} - A_{n-j}.
std::vector<double> dgs_weights(std::span<const double> A);

/// G functional for differences w^1..w^n with level-n kernels A (size n).
/// Empty input gives 0.
double dgs_G(std::span<const double> A, std::span<const double> diffs);

/// G and R at level n. A_prev are the level n-1 kernels (empty for n = 1),
/// A_cur the level n kernels, diffs = w^1..w^n.
DgsTerms dgs_functionals(std::span<const double> A_prev, std::span<const double> A_cur,
                         std::span<const double> diffs);

/// Both sides of the discrete gradient structure
///   2 w^n D^n = G[w^n] - G[w^{n-1}] + R[w^n] + 2 alpha/(2-alpha) a_0 (w^n)^2
/// compared at every level of a scalar history v^0..v^N, w^n = v^n - v^{n-1}.
struct DgsCheck {
    double max_residual = 0.0;  // |lhs - rhs| relative to the operand magnitude
    double min_G = std::numeric_limits<double>::infinity();
    double min_R = std::numeric_limits<double>::infinity();
};
DgsCheck dgs_identity_check(const TimeMesh& mesh, FracOrder order, std::span<const double> values);

}  // namespace fracstep
