#include "fracstep/fracmesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace fracstep {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

// 53-bit uniform double in [0,1); independent of the standard library's
// distribution implementations so meshes are reproducible across toolchains.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

TimeMesh TimeMesh::from_nodes(std::vector<double> nodes) {
    require(nodes.size() >= 2, "time mesh needs at least one step");
    require(nodes.front() == 0.0, "time mesh must start at t_0 = 0");
    TimeMesh mesh;
    mesh.taus_.reserve(nodes.size() - 1);
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        require(std::isfinite(nodes[k]), "time mesh node is not finite");
        const double tau = nodes[k] - nodes[k - 1];
        require(tau > 0.0, "time mesh nodes must be strictly increasing");
        mesh.taus_.push_back(tau);
    }
    mesh.nodes_ = std::move(nodes);
    return mesh;
}

TimeMesh TimeMesh::from_steps(std::span<const double> steps) {
    require(!steps.empty(), "time mesh needs at least one step");
    TimeMesh mesh;
    for (double tau : steps) mesh.push_step(tau);
    return mesh;
}

void TimeMesh::push_step(double tau) {
    require(std::isfinite(tau) && tau > 0.0, "time step must be positive and finite");
    const double next = nodes_.back() + tau;
    require(next > nodes_.back(), "time step vanishes at this time scale");
    nodes_.push_back(next);
    taus_.push_back(tau);
}

TimeMesh build_graded_mesh(double T0, int N0, double gamma) {
    require(std::isfinite(T0) && T0 > 0.0, "graded mesh: T0 must be positive");
    require(N0 >= 1, "graded mesh: N0 must be at least 1");
    require(std::isfinite(gamma) && gamma >= 1.0, "graded mesh: gamma must be >= 1");
    std::vector<double> nodes(static_cast<std::size_t>(N0) + 1);
    for (int k = 0; k <= N0; ++k) {
        nodes[static_cast<std::size_t>(k)] =
            T0 * std::pow(static_cast<double>(k) / static_cast<double>(N0), gamma);
    }
    nodes.back() = T0;
    return TimeMesh::from_nodes(std::move(nodes));
}

TwoPhaseLayout two_phase_layout(double T, double gamma, int N) {
    require(std::isfinite(T) && T > 0.0, "two-phase mesh: T must be positive");
    require(std::isfinite(gamma) && gamma >= 1.0, "two-phase mesh: gamma must be >= 1");
    require(N >= 1, "two-phase mesh: N must be at least 1");
    TwoPhaseLayout layout;
    layout.T0 = std::min(1.0 / gamma, T);
    if (layout.T0 == T) {
        layout.N0 = N;
        layout.N1 = 0;
        return layout;
    }
    // Guard the ceiling against quotients that are integers up to round-off.
    const double q = static_cast<double>(N) / (T + 1.0 - 1.0 / gamma);
    layout.N0 = static_cast<int>(std::ceil(q - 1e-9));
    layout.N0 = std::max(layout.N0, 1);
    if (layout.N0 >= N) {
        throw std::invalid_argument("two-phase mesh: N0 = " + std::to_string(layout.N0) +
                                    " leaves no room for the random phase (N = " +
                                    std::to_string(N) + ")");
    }
    layout.N1 = N - layout.N0;
    return layout;
}

TimeMesh build_two_phase_mesh(double T, double gamma, int N, std::uint64_t seed) {
    const TwoPhaseLayout layout = two_phase_layout(T, gamma, N);
    if (layout.N1 == 0) return build_graded_mesh(T, N, gamma);

    const TimeMesh graded = build_graded_mesh(layout.T0, layout.N0, gamma);
    std::vector<double> nodes(graded.nodes().begin(), graded.nodes().end());

    std::mt19937_64 rng(seed);
    std::vector<double> eps(static_cast<std::size_t>(layout.N1));
    for (double& e : eps) {
        do {
            e = uniform01(rng);
        } while (e == 0.0);
    }
    double total = 0.0;
    for (double e : eps) total += e;

    double partial = 0.0;
    for (int k = 0; k < layout.N1; ++k) {
        partial += eps[static_cast<std::size_t>(k)];
        nodes.push_back(layout.T0 + (T - layout.T0) * (partial / total));
    }
    nodes.back() = T;
    return TimeMesh::from_nodes(std::move(nodes));
}

ConstraintReport check_ratio_constraint(const TimeMesh& mesh, double r_star, bool strict) {
    ConstraintReport report;
    report.r_star = r_star;
    report.min_ratio = std::numeric_limits<double>::infinity();
    for (int k = 2; k <= mesh.steps(); ++k) {
        const double r = mesh.ratio(k);
        if (r < report.min_ratio) {
            report.min_ratio = r;
            report.argmin = k;
        }
        if (r < r_star) report.violations.push_back({k, r});
    }
    if (strict && !report.ok()) {
        const auto& v = report.violations.front();
        throw std::domain_error("step ratio r_" + std::to_string(v.k) + " = " +
                                std::to_string(v.ratio) + " is below r* = " +
                                std::to_string(r_star));
    }
    return report;
}

void AdaptiveConfig::validate() const {
    require(tau_min > 0.0 && tau_min <= tau_max, "adaptive: need 0 < tau_min <= tau_max");
    require(eta >= 0.0, "adaptive: eta must be nonnegative");
    require(r_star > 0.25 && r_star < 0.5, "adaptive: r_star must lie in (1/4, 1/2)");
    if (physical_cap) require(*physical_cap > 0.0, "adaptive: physical cap must be positive");
}

AdaptiveStep adaptive_next_step(double tau_n, double change_norm, const AdaptiveConfig& cfg) {
    const double pi = std::sqrt(1.0 + cfg.eta * change_norm * change_norm);
    const double tau_ada = std::max(cfg.tau_min, cfg.tau_max / pi);
    AdaptiveStep out;
    const double floor = cfg.r_star * tau_n;
    out.tau = std::max(tau_ada, floor);
    while (out.tau / tau_n < cfg.r_star) out.tau = std::nextafter(out.tau, INFINITY);
    if (cfg.physical_cap && out.tau > *cfg.physical_cap) {
        out.tau = *cfg.physical_cap;
        out.cap_broke_ratio_floor = out.tau < floor;
    }
    return out;
}

void write_mesh_csv(std::ostream& out, const TimeMesh& mesh) {
    out << "k,t_k,tau_k,r_k\n" << std::setprecision(17);
    out << 0 << ',' << mesh.node(0) << ",,\n";
    for (int k = 1; k <= mesh.steps(); ++k) {
        out << k << ',' << mesh.node(k) << ',' << mesh.tau(k) << ',';
        if (k >= 2) out << mesh.ratio(k);
        out << '\n';
    }
}

}  // namespace fracstep

namespace fracstep {

TimeMesh random_admissible_mesh(int N, double r_min, double r_max, std::uint64_t seed) {
    if (N < 1) throw std::invalid_argument("random mesh: need at least one step");
    if (!(r_min > 0.0 && r_max >= r_min)) throw std::invalid_argument("random mesh: need 0 < r_min <= r_max");
    std::mt19937_64 rng(seed);
    std::vector<double> steps;
    steps.reserve(static_cast<std::size_t>(N));
    steps.push_back(std::pow(10.0, -3.0 * uniform01(rng)));
    const double span = std::log(r_max / r_min);
    for (int k = 2; k <= N; ++k) {
        // every tenth ratio or so sits on the lower bound itself
        const double u = uniform01(rng);
        const double r = u < 0.1 ? r_min : r_min * std::exp(span * uniform01(rng));
        double tau = steps.back() * r;
        while (tau / steps.back() < r) tau = std::nextafter(tau, INFINITY);
        steps.push_back(tau);
    }
    return TimeMesh::from_steps(steps);
}

}  // namespace fracstep
