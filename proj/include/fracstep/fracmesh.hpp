#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace fracstep {

/// Nonuniform time mesh 0 = t_0 < t_1 < ... < t_N.
///
/// Steps and ratios use 1-based indices as in the usual notation:
/// tau(k) = t_k - t_{k-1} for 1 <= k <= N and ratio(k) = tau(k)/tau(k-1)
/// for 2 <= k <= N. Steps are stored alongside the nodes so that a mesh
/// grown step by step keeps the exact step sizes it was built from.
class TimeMesh {
public:
    TimeMesh() : nodes_{0.0} {}

    /// Mesh from explicit nodes; throws std::invalid_argument unless
    /// nodes[0] == 0 and the sequence is strictly increasing and finite.
    static TimeMesh from_nodes(std::vector<double> nodes);
    /// Mesh from step sizes, t_0 = 0.
    static TimeMesh from_steps(std::span<const double> steps);

    int steps() const { return static_cast<int>(taus_.size()); }
    double node(int k) const { return nodes_.at(static_cast<std::size_t>(k)); }
    double tau(int k) const { return taus_.at(static_cast<std::size_t>(k - 1)); }
    double ratio(int k) const { return tau(k) / tau(k - 1); }
    double final_time() const { return nodes_.back(); }
    std::span<const double> nodes() const { return nodes_; }

    /// t_{k-theta} = theta t_{k-1} + (1-theta) t_k.
    double offset_node(int k, double theta) const {
        return theta * node(k - 1) + (1.0 - theta) * node(k);
    }

    /// Append one step of size tau > 0.
    void push_step(double tau);

private:
    std::vector<double> nodes_;
    std::vector<double> taus_;
};

/// t_k = T0 (k/N0)^gamma, k = 0..N0.
TimeMesh build_graded_mesh(double T0, int N0, double gamma);

/// Split of a two-phase mesh.
struct TwoPhaseLayout {
    double T0 = 0.0;
    int N0 = 0;
    int N1 = 0;
};

/// T0 = min(1/gamma, T), N0 = ceil(N / (T + 1 - 1/gamma)), N1 = N - N0.
/// A layout with T0 == T carries no random phase and uses N0 = N.
TwoPhaseLayout two_phase_layout(double T, double gamma, int N);

/// Graded steps on [0, T0] followed by N1 random steps on [T0, T] scaled so
/// that the last node is exactly T. Same seed, same mesh.
TimeMesh build_two_phase_mesh(double T, double gamma, int N, std::uint64_t seed);

/// N steps with tau_1 log-uniform in [1e-3, 1] and ratios log-uniform in
/// [r_min, r_max]; about one ratio in ten equals r_min exactly.
TimeMesh random_admissible_mesh(int N, double r_min, double r_max, std::uint64_t seed);

struct RatioViolation {
    int k = 0;
    double ratio = 0.0;
};

struct ConstraintReport {
    double r_star = 0.0;
    double min_ratio = 0.0;
    int argmin = 0;
    std::vector<RatioViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Lists every k >= 2 with r_k < r_star. With strict set, a non-empty list
/// throws std::domain_error instead.
ConstraintReport check_ratio_constraint(const TimeMesh& mesh, double r_star, bool strict = false);

struct AdaptiveConfig {
    double tau_max = 0.1;
    double tau_min = 1e-3;
    double eta = 1e3;
    double r_star = 0.4;
    std::optional<double> physical_cap;

    void validate() const;
};

struct AdaptiveStep {
    double tau = 0.0;
    /// The physical cap was applied and pushed the step below r_star * tau_n.
    bool cap_broke_ratio_floor = false;
};

/// tau_ada = max(tau_min, tau_max / sqrt(1 + eta * change_norm^2)), then the
/// ratio floor max(tau_ada, r_star * tau_n), then the optional cap.
AdaptiveStep adaptive_next_step(double tau_n, double change_norm, const AdaptiveConfig& cfg);

/// CSV with header k,t_k,tau_k,r_k (tau and r blank where undefined).
void write_mesh_csv(std::ostream& out, const TimeMesh& mesh);

}  // namespace fracstep
