#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracstep/audit.hpp"
#include "fracstep/tfac.hpp"

namespace fracstep {

/// Exit statuses of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitAudit = 2, kExitSolver = 3, kExitConfig = 4 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
    std::string command;  // accuracy | coarsen | kernels | rstar
    std::filesystem::path config;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;  // overrides the config's seed
    bool quick = false;
};

/// 64-bit FNV-1a of the raw config text.
std::uint64_t config_hash(const std::string& text);

/// Least-squares slope of log e against log N, reported as order = -slope.
struct OrderFit {
    double order = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS of the log-space residuals
    int levels = 0;
};
/// Needs at least two points with positive errors; throws std::invalid_argument otherwise.
OrderFit fit_order(const std::vector<int>& N, const std::vector<double>& errors);

// ---------------------------------------------------------------- rstar

struct RstarRow {
    double alpha = 0.0;
    double r_star = 0.0;
    double residual = 0.0;
};
struct RstarTable {
    std::vector<RstarRow> rows;
    bool monotone = true;
    double max_residual = 0.0;
};
RstarTable rstar_table(const std::vector<double>& alphas);

// ---------------------------------------------------------------- kernels

struct KernelsConfig {
    std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    int fuzz_count = 100;
    int n_max = 20;
    double r_max = 4.0;
    bool uniform = true;
    int dgs_histories = 50;
    int dgs_levels = 10;
    std::optional<std::vector<double>> mesh_nodes;  // explicit mesh, audited as given
    std::uint64_t seed = 0;
};
KernelsConfig parse_kernels_config(const std::string& json_text);

struct KernelsAlphaResult {
    double alpha = 0.0;
    AuditReport compliant;      // meshes with every r_k >= r*(alpha)
    AuditReport noncompliant;   // explicit meshes that break the ratio bound
    int meshes = 0;
    DgsCheck dgs;
};
struct KernelsResult {
    std::vector<KernelsAlphaResult> per_alpha;
    double dgs_tolerance = 1e-11;
    bool ok() const;
};
KernelsResult run_kernel_audit(const KernelsConfig& cfg);

// ---------------------------------------------------------------- accuracy

struct AccuracyConfig {
    double alpha = 0.8;
    double sigma = 0.4;
    std::vector<double> gammas{1.0, 2.5};
    std::vector<int> N{20, 40, 80, 160};
    int M = 64;
    double epsilon2 = 0.1;
    double T = 1.0;
    ForcingLaplacian laplacian = ForcingLaplacian::Discrete;
    std::uint64_t seed = 0;
};
AccuracyConfig parse_accuracy_config(const std::string& json_text);

struct AccuracyRow {
    double gamma = 0.0;
    int N = 0;
    double error = 0.0;  // max_n ||Phi^n - phi^n||
    bool ok = false;
    std::string message;
};
struct AccuracyGammaFit {
    double gamma = 0.0;
    std::optional<OrderFit> fit;
    bool decreasing = false;
};
struct AccuracyResult {
    std::vector<AccuracyRow> rows;
    std::vector<AccuracyGammaFit> fits;
    /// Spatial error relative to the smallest temporal error: exactly 0 with
    /// the discrete forcing, otherwise estimated from an M vs 2M rerun.
    double spatial_error = 0.0;
    double smallest_error = 0.0;
    bool solver_failure = false;
};
/// Error of one manufactured-solution run on the two-phase mesh.
double manufactured_error(const AccuracyConfig& cfg, double gamma, int N, int M);
AccuracyResult run_accuracy(const AccuracyConfig& cfg);

// ---------------------------------------------------------------- coarsen

struct CoarsenConfig {
    std::vector<double> alphas{0.4, 0.7, 0.9};
    std::vector<double> etas{1e3};
    int M = 128;
    double epsilon = 0.05;
    double amplitude = 1e-3;
    double T = 50.0;
    double tau_min = 1e-3;
    double tau_max = 1e-1;
    double warmup_gamma = 3.0;
    int warmup_N0 = 30;
    double warmup_T0 = 0.01;
    /// Clip controller steps to the maximum-bound cap and treat a bound
    /// breach as an error.
    bool enforce_cap = true;
    std::vector<double> snapshot_times{1.0, 5.0, 20.0, 50.0};
    std::uint64_t seed = 0;
};
/// quick switches to T = 5 on a 64^2 grid.
CoarsenConfig parse_coarsen_config(const std::string& json_text, bool quick);

/// Uniform random field in [-amplitude, amplitude], reproducible from the seed.
PhaseField random_initial_field(const Grid2D& grid, double amplitude, std::uint64_t seed);

struct CoarsenSummary {
    double alpha = 0.0;
    double eta = 0.0;
    int steps = 0;
    double max_norm = 0.0;
    double E_start = 0.0;
    double E_end = 0.0;
    double max_gap = 0.0;            // max_n |E_alpha - E|
    double step_fluctuation = 0.0;   // std of log step ratios on controller steps
    int warnings = 0;
    DissipationReport dissipation;
    bool E_nonincreasing = true;
    bool E_alpha_nonincreasing = true;
};
CoarsenSummary summarize(const SolveTrajectory& traj, double alpha, double eta, int warmup_steps);
SolveTrajectory run_coarsening(const CoarsenConfig& cfg, double alpha, double eta);

// ---------------------------------------------------------------- commands

/// Runs one subcommand, writing its outputs into spec.out_dir. Returns an
/// ExitCode; configuration problems come back as kExitConfig, not exceptions.
int run_command(const ExperimentSpec& spec);

}  // namespace fracstep
