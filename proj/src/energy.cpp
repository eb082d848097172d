#include "fracstep/energy.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "fracstep/special.hpp"

namespace fracstep {

double original_energy(const PhaseField& phi, double epsilon, const Grid2D& grid) {
    CompensatedSum potential;
    for (double v : phi.values()) potential.add(double_well(v));
    const double h2 = grid.h() * grid.h();
    return 0.5 * epsilon * epsilon * grad_energy(phi, grid) + h2 * potential.value();
}

double g_term(std::span<const PhaseField> history, std::span<const double> A, const Grid2D& grid) {
    if (history.empty()) throw std::invalid_argument("g_term: empty history");
    const std::size_t n = history.size() - 1;
    if (A.size() != n) throw std::invalid_argument("g_term: kernels do not match the history length");
    if (n == 0) return 0.0;
    const std::vector<double> c = dgs_weights(A);
    const PhaseField& cur = history[n];
    CompensatedSum total;
    for (std::size_t j = 0; j < n; ++j) {
        const PhaseField& old = history[j];
        CompensatedSum sq;
        for (std::size_t p = 0; p < cur.size(); ++p) {
            const double d = cur[p] - old[p];
            sq.add(d * d);
        }
        total.add(c[j] * sq.value());
    }
    return 0.5 * grid.h() * grid.h() * total.value();
}

double dissipation_coefficient(double alpha, double a0) { return alpha / (2.0 * (2.0 - alpha)) * a0; }

EnergyRecord modified_energy(std::span<const PhaseField> history, const KernelSet* kernels,
                             double alpha, double epsilon, const Grid2D& grid,
                             const EnergyRecord* prev, double tau_n) {
    if (history.empty()) throw std::invalid_argument("modified_energy: empty history");
    const int n = static_cast<int>(history.size()) - 1;
    EnergyRecord rec;
    rec.level = n;
    rec.E = original_energy(history.back(), epsilon, grid);
    if (n > 0) {
        if (!kernels || kernels->level != n) throw std::invalid_argument("modified_energy: level-n kernels required");
        rec.G_term = g_term(history, kernels->A, grid);
    }
    rec.E_alpha = rec.E + rec.G_term;
    if (prev && n > 0) {
        if (!(tau_n > 0.0)) throw std::invalid_argument("modified_energy: tau_n must be positive");
        const PhaseField& cur = history[static_cast<std::size_t>(n)];
        const PhaseField& last = history[static_cast<std::size_t>(n - 1)];
        CompensatedSum sq;
        for (std::size_t p = 0; p < cur.size(); ++p) {
            const double d = cur[p] - last[p];
            sq.add(d * d);
        }
        const double diff_norm2 = grid.h() * grid.h() * sq.value();  // ||grad_tau phi^n||^2
        const double local = dissipation_coefficient(alpha, kernels->a[0]) * diff_norm2;
        rec.dissipation_increment = (rec.E_alpha - prev->E_alpha) + local;
        rec.dissipation_lhs = rec.dissipation_increment / tau_n;
    }
    return rec;
}

DissipationReport dissipation_audit(std::span<const EnergyRecord> records, const TimeMesh& mesh,
                                    double alpha, std::optional<double> cap) {
    DissipationReport report;
    report.worst_margin = -std::numeric_limits<double>::infinity();
    const double r_star = rstar(alpha);
    for (std::size_t i = 1; i < records.size(); ++i) {
        const EnergyRecord& r = records[i];
        const int n = r.level;
        const double tol = kDissipationTolerance * (1.0 + std::abs(r.E_alpha));
        const double margin = r.dissipation_increment - tol;
        if (margin > report.worst_margin) {
            report.worst_margin = margin;
            report.worst_level = n;
        }
        if (r.E_alpha > records[i - 1].E_alpha + tol) report.non_monotone.push_back(n);
        if (margin > 0.0) {
            DissipationViolation v;
            v.level = n;
            v.increment = r.dissipation_increment;
            v.tolerance = tol;
            v.step_over_cap = cap.has_value() && mesh.tau(n) > *cap;
            for (int k = 2; k <= n; ++k) {
                if (mesh.ratio(k) < r_star) {
                    v.ratio_below_rstar = true;
                    break;
                }
            }
            report.violations.push_back(v);
        }
    }
    return report;
}

void write_energy_csv_header(std::ostream& out) {
    out << "n,t_n,tau_n,E,E_alpha,G_term,dissipation_lhs,max_norm,fp_iters\n";
}

void write_energy_csv_row(std::ostream& out, const EnergyRecord& r, double t, double tau,
                          double max_norm, int fp_iters) {
    out << std::setprecision(17) << r.level << ',' << t << ',' << tau << ',' << r.E << ',' << r.E_alpha
        << ',' << r.G_term << ',' << r.dissipation_lhs << ',' << max_norm << ',' << fp_iters << '\n';
}

}  // namespace fracstep
