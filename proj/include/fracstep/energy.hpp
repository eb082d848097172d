#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fracstep/fracmesh.hpp"
#include "fracstep/l21sigma.hpp"
#include "fracstep/spatial.hpp"

namespace fracstep {

struct EnergyRecord {
    int level = 0;
    double E = 0.0;
    double G_term = 0.0;   // (1/2) <G[grad_tau phi^n], 1>
    double E_alpha = 0.0;  // E + G_term
    /// d_tau E_alpha + alpha/(2(2-alpha)) a_0 tau_n ||d_tau phi^{n-1/2}||^2; 0 at level 0.
    double dissipation_lhs = 0.0;
    /// Same quantity multiplied by tau_n (energy units); the audit tests this one.
    double dissipation_increment = 0.0;
};

/// Double-well potential (phi^2 - 1)^2 / 4.
inline double double_well(double phi) {
    const double s = phi * phi - 1.0;
    return 0.25 * s * s;
}

/// (eps^2/2) ||grad phi||^2 + <F(phi), 1>.
double original_energy(const PhaseField& phi, double epsilon, const Grid2D& grid);

/// (1/2) <G[grad_tau phi^n], 1> for history phi^0..phi^n and level-n
/// auxiliary kernels A. Prefix sums of the differences are formed as field
/// subtractions phi^n - phi^j.
double g_term(std::span<const PhaseField> history, std::span<const double> A, const Grid2D& grid);

/// alpha / (2 (2 - alpha)) a_0^{(n)}.
double dissipation_coefficient(double alpha, double a0);

/// Energy record at level n = history.size() - 1. kernels may be null only
/// for n = 0. When prev is given the dissipation terms are filled in.
EnergyRecord modified_energy(std::span<const PhaseField> history, const KernelSet* kernels,
                             double alpha, double epsilon, const Grid2D& grid,
                             const EnergyRecord* prev = nullptr, double tau_n = 0.0);

struct DissipationViolation {
    int level = 0;
    double increment = 0.0;  // tau_n * dissipation_lhs
    double tolerance = 0.0;
    bool step_over_cap = false;
    bool ratio_below_rstar = false;
};

struct DissipationReport {
    std::vector<DissipationViolation> violations;
    std::vector<int> non_monotone;  // levels with E_alpha^n > E_alpha^{n-1} + tol
    double worst_margin = 0.0;      // max over n of increment - tolerance (negative is good)
    int worst_level = 0;
    bool ok() const { return violations.empty() && non_monotone.empty(); }
};

/// Relative tolerance of the dissipation audit.
inline constexpr double kDissipationTolerance = 1e-10;

/// Per-step check of the dissipation law
///   E_alpha^n - E_alpha^{n-1} + alpha/(2(2-alpha)) a_0 ||grad_tau phi^n||^2 <= 1e-10 (1 + |E_alpha^n|).
/// The cap argument is the maximum-bound step cap; it and r*(alpha) are only
/// used to say which hypothesis a flagged step broke.
DissipationReport dissipation_audit(std::span<const EnergyRecord> records, const TimeMesh& mesh,
                                    double alpha, std::optional<double> cap);

/// CSV: n,t_n,tau_n,E,E_alpha,G_term,dissipation_lhs,max_norm,fp_iters
void write_energy_csv_header(std::ostream& out);
void write_energy_csv_row(std::ostream& out, const EnergyRecord& r, double t, double tau,
                          double max_norm, int fp_iters);

}  // namespace fracstep
