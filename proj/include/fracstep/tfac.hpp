#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracstep/energy.hpp"
#include "fracstep/fracmesh.hpp"
#include "fracstep/l21sigma.hpp"
#include "fracstep/spatial.hpp"

namespace fracstep {

/// Fixed-point or linear solver ran out of iterations.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, int level, double residual)
        : std::runtime_error(what), level_(level), residual_(residual) {}
    int level() const { return level_; }
    double residual() const { return residual_; }

private:
    int level_;
    double residual_;
};

/// |phi^n| exceeded 1 on a step that satisfied the maximum-bound hypotheses.
class BoundViolation : public std::runtime_error {
public:
    BoundViolation(const std::string& what, int level, double max_norm)
        : std::runtime_error(what), level_(level), max_norm_(max_norm) {}
    int level() const { return level_; }
    double max_norm() const { return max_norm_; }

private:
    int level_;
    double max_norm_;
};

/// Which Laplacian the manufactured force assumes for sin(x)sin(y): the
/// continuous one (-2) or the eigenvalue of the five-point stencil, which
/// removes the spatial error from the accuracy study entirely.
enum class ForcingLaplacian { Continuous, Discrete };

struct ManufacturedForcing {
    double sigma = 0.5;
    ForcingLaplacian laplacian = ForcingLaplacian::Discrete;
};

struct SolverConfig {
    double alpha = 0.5;
    double epsilon = 0.05;
    Grid2D grid{64, 6.283185307179586};
    double fixed_point_tol = 1e-12;
    int fixed_point_max_iter = 200;
    double linear_tol = 1e-13;
    int linear_max_iter = 2000;
    /// Treat |phi| > 1 + 1e-10 on a hypothesis-compliant step as an error.
    bool enforce_bound = false;
    std::optional<ManufacturedForcing> forcing;

    void validate() const;
};

/// Largest step for which unique solvability and the maximum bound hold:
/// min{ (theta w(1-theta)/(2(1-theta)))^{1/alpha}, (h^2 w(1-theta)/(4 eps^2))^{1/alpha} }
/// with w = omega_{2-alpha}.
double step_size_cap(double alpha, double h, double epsilon);

/// Nonlocal history term sum_{k=1}^{n-1} hat_a_{n-k} (phi^k - phi^{k-1}).
/// Direct summation is the only backend; a fast evaluator would implement
/// this interface.
class HistorySum {
public:
    virtual ~HistorySum() = default;
    /// history holds phi^0..phi^{n-1}; kernels are level n.
    virtual void accumulate(const KernelSet& kernels, std::span<const PhaseField> history,
                            PhaseField& out) const = 0;
};

class DirectHistorySum final : public HistorySum {
public:
    void accumulate(const KernelSet& kernels, std::span<const PhaseField> history,
                    PhaseField& out) const override;
};

struct StepResult {
    PhaseField phi;
    int iterations = 0;
    double residual = 0.0;  // last successive-iterate max-norm change
};

/// One implicit L2-1sigma step. history = phi^0..phi^{n-1}, kernels at
/// level n = history.size(). Newton iteration on the cubic term with the
/// history frozen (slope clamped so c + (1-theta) f' >= c/2); each sweep
/// solves (diag - (1-theta) eps^2 Lap_h) u = rhs by Jacobi-preconditioned CG.
StepResult step(std::span<const PhaseField> history, const TimeMesh& mesh, const KernelSet& kernels,
                const SolverConfig& cfg, const HistorySum* backend = nullptr);

/// Reference Crank-Nicolson step of the classical Allen-Cahn equation.
StepResult crank_nicolson_step(const PhaseField& prev, double tau, const SolverConfig& cfg);

/// Phi(x, y, t) = omega_{1+sigma}(t) sin(x) sin(y) on the grid.
PhaseField manufactured_solution(double sigma, const Grid2D& grid, double t);

/// Force g such that Phi solves the forced equation:
/// omega_{1+sigma-alpha}(t) sin sin + f(Phi) - eps^2 Lap Phi.
PhaseField manufactured_force(const ManufacturedForcing& forcing, double alpha, double epsilon,
                              const Grid2D& grid, double t);

struct LevelRecord {
    int n = 0;
    double t = 0.0;
    double tau = 0.0;
    double max_norm = 0.0;
    int fp_iters = 0;
    double fp_residual = 0.0;
    bool over_cap = false;
    bool ratio_below_rstar = false;
    bool cap_broke_ratio_floor = false;
    std::optional<EnergyRecord> energy;
};

struct Snapshot {
    double requested_time = 0.0;
    int n = 0;
    double t = 0.0;
    PhaseField field;
};

struct SolveTrajectory {
    TimeMesh mesh;
    std::vector<LevelRecord> levels;  // n = 0..N
    std::vector<Snapshot> snapshots;
    std::vector<PhaseField> fields;  // full history when kept
    double r_star = 0.0;
    double cap = 0.0;

    std::vector<EnergyRecord> energies() const;
    int warnings() const;
};

/// Graded warm-up followed by controller-chosen steps until t_N >= final_time.
/// The first controlled step is seeded with the last warm-up step.
struct AdaptivePlan {
    TimeMesh warmup;
    AdaptiveConfig controller;
    double final_time = 1.0;
};

struct RunOptions {
    bool record_energy = true;
    bool keep_fields = false;
    std::vector<double> snapshot_times;
    /// Called after every accepted level (including n = 0).
    std::function<void(int n, double t, const PhaseField& phi)> observer;
    const HistorySum* backend = nullptr;
};

SolveTrajectory run(const SolverConfig& cfg, const TimeMesh& mesh, const PhaseField& initial,
                    const RunOptions& options = {});
SolveTrajectory run(const SolverConfig& cfg, const AdaptivePlan& plan, const PhaseField& initial,
                    const RunOptions& options = {});

}  // namespace fracstep
