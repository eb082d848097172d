#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fracstep/fracmesh.hpp"
#include "fracstep/l21sigma.hpp"

namespace fracstep {

/// Bridging integrals of the kernel analysis at level n.
///
///   I_{n-k} = int_{t_{k-1}}^{t_k} (t_k - t)/tau_k  w''_n(t) dt
///   J_{n-k} = int_{t_{k-1}}^{t_k} (t - t_{k-1})/tau_k  w''_n(t) dt
///
/// for 1 <= k <= n-1, with w''_n(t) = alpha (t_{n-theta} - t)^{-1-alpha} / Gamma(1-alpha).
/// I and J are indexed by lag j = n - k (entry 0 unused, 0). beta is indexed
/// by k (entries 0 and 1 unused, 0).
struct DiagnosticSet {
    int level = 0;
    std::vector<double> I;
    std::vector<double> J;
    std::vector<double> beta;
    /// Largest quadrature error estimate over all I and J entries.
    double max_error_estimate = 0.0;
};

/// beta_k = 2(1-alpha/2) r_k / (1 + alpha + (1-alpha/2) r_k).
double beta_ratio(double alpha, double r);

/// I, J by adaptive Gauss-Kronrod quadrature and the beta sequence. Requires
/// n >= 2. Throws std::runtime_error (with the achieved error estimate) if
/// the quadrature does not converge.
DiagnosticSet diagnostics(const TimeMesh& mesh, FracOrder order, int n);

struct AuditEntry {
    int n = 0;
    std::string property;
    int k = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // lhs - rhs; the property claims lhs > rhs
    bool violation = false;
};

struct PropertySummary {
    long checks = 0;
    long violations = 0;
    long nonpositive = 0;  // slack <= 0 but within the round-off floor
    double min_slack = 0.0;
    double min_relative_slack = 0.0;  // slack / round-off scale
    bool seen = false;
};

/// Kernel property audit. Violations are entries, never exceptions.
///
/// A strict inequality lhs > rhs counts as violated when
/// lhs - rhs < -kSlackFloor * scale, where scale is the magnitude of the
/// operands that enter the two sides.
struct AuditReport {
    static constexpr double kSlackFloor = 1e-13;

    std::vector<AuditEntry> entries;  // all checks when recorded, else violations only
    std::map<std::string, PropertySummary> summary;
    long violations = 0;
    long checks = 0;

    bool ok() const { return violations == 0; }
    void merge(const AuditReport& other);
};

struct AuditOptions {
    bool record_all = false;
    bool include_diagnostics = true;  // the bridging-integral inequalities
};

/// Checks, for 2 <= n <= n_max, the auxiliary kernel properties
/// (monotone, decaying across levels, convex), the zeta inequalities and the
/// I/J/zeta inequalities of the kernel analysis.
AuditReport audit_kernel_properties(const TimeMesh& mesh, FracOrder order, int n_max,
                                    const AuditOptions& options = {});

/// CSV with header n,property,k,lhs,rhs,slack.
void write_audit_csv(std::ostream& out, const AuditReport& report);

}  // namespace fracstep
