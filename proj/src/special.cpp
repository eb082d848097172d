#include "fracstep/special.hpp"

#include <limits>

namespace fracstep {

double omega(double beta, double t) {
    if (t > 0.0) {
        if (beta == 1.0) return 1.0;
        return std::exp((beta - 1.0) * std::log(t) - std::lgamma(beta));
    }
    if (beta > 1.0) return 0.0;
    if (beta == 1.0) return 1.0;
    return std::numeric_limits<double>::infinity();
}

double omega_increment(double beta, double y, double d) {
    if (y <= 0.0) return omega(beta, y + d) - omega(beta, y);
    // y^(beta-1) [ (1 + d/y)^(beta-1) - 1 ] / Gamma(beta)
    return omega(beta, y) * std::expm1((beta - 1.0) * std::log1p(d / y));
}

double trapezoid_defect(double p, double u) {
    if (u <= 0.0) return 0.0;
    if (u <= 0.5) {
        // -sum_{m>=3} C(p, m-1) (m-2)/(2m) u^m
        double binom = p * (p - 1.0) / 2.0;  // C(p, 2)
        double upow = u * u * u;
        double total = 0.0;
        for (int m = 3; m < 200; ++m) {
            const double term = -binom * (m - 2.0) / (2.0 * m) * upow;
            total += term;
            if (std::abs(term) <= 1e-18 * std::abs(total)) break;
            binom *= (p - (m - 1.0)) / m;
            upow *= u;
        }
        return total;
    }
    const double l = std::log1p(u);
    return std::expm1((p + 1.0) * l) / (p + 1.0) - 0.5 * u * (std::expm1(p * l) + 2.0);
}

}  // namespace fracstep
