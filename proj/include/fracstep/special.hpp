#pragma once

#include <cmath>
#include <span>

namespace fracstep {

/// Power kernel omega_beta(t) = t^(beta-1) / Gamma(beta), evaluated through
/// log-gamma so large arguments do not overflow. omega_beta(0) is 0 for
/// beta > 1, 1 for beta == 1 and +inf for beta < 1.
double omega(double beta, double t);

/// omega_beta(y + d) - omega_beta(y) for y > 0, d >= 0, without cancellation
/// when d << y.
double omega_increment(double beta, double y, double d);

/// Integral of (1+s)^p over [0, u] minus its trapezoid approximation,
///   [(1+u)^(p+1) - 1]/(p+1) - (u/2)[(1+u)^p + 1],
/// computed by series for small u. Strictly positive for u > 0, p in (0,1).
double trapezoid_defect(double p, double u);

/// Neumaier-compensated accumulator. Summation order is the call order.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

}  // namespace fracstep
