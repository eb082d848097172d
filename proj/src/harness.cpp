#include "fracstep/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fracstep {

using nlohmann::json;

std::uint64_t config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

OrderFit fit_order(const std::vector<int>& N, const std::vector<double>& errors) {
    if (N.size() != errors.size() || N.size() < 2) throw std::invalid_argument("order fit needs two or more levels");
    const std::size_t m = N.size();
    std::vector<double> x(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (N[i] <= 0 || !(errors[i] > 0.0)) throw std::invalid_argument("order fit needs positive N and errors");
        x[i] = std::log(static_cast<double>(N[i]));
        y[i] = std::log(errors[i]);
    }
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / m;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    if (sxx == 0.0) throw std::invalid_argument("order fit needs distinct N");
    const double slope = sxy / sxx;
    OrderFit fit;
    fit.order = -slope;
    fit.intercept = ym - slope * xm;
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = y[i] - (fit.intercept + slope * x[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / m);
    fit.levels = static_cast<int>(m);
    return fit;
}

RstarTable rstar_table(const std::vector<double>& alphas) {
    RstarTable table;
    for (double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("rstar: alpha must lie in [0, 1]");
        RstarRow row{a, rstar(a), 0.0};
        row.residual = std::abs(rstar_residual(row.r_star, a));
        table.max_residual = std::max(table.max_residual, row.residual);
        if (!table.rows.empty() && a > table.rows.back().alpha && !(row.r_star > table.rows.back().r_star)) {
            table.monotone = false;
        }
        table.rows.push_back(row);
    }
    return table;
}

namespace {

// Derived stream seeds, so runs sharing a base seed stay independent.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform_pm1(std::mt19937_64& rng) { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; }

json parse_json(const std::string& text) {
    try {
        json j = json::parse(text);
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j.items()) {
        if (!ok.count(item.key())) throw ConfigError("unknown config key '" + item.key() + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

void require(bool cond, const std::string& what) {
    if (!cond) throw ConfigError(what);
}

void require_alphas(const std::vector<double>& alphas, bool closed) {
    require(!alphas.empty(), "alpha list is empty");
    for (double a : alphas) {
        const bool in = closed ? (a >= 0.0 && a <= 1.0) : (a > 0.0 && a < 1.0);
        require(in, closed ? "alpha must lie in [0, 1]" : "alpha must lie in (0, 1)");
    }
}

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

// ---------------------------------------------------------------- kernels

KernelsConfig parse_kernels_config(const std::string& text) {
    const json j = parse_json(text);
    check_keys(j, {"alphas", "fuzz_count", "n_max", "r_max", "uniform", "dgs_histories", "dgs_levels",
                   "mesh_nodes", "seed"});
    KernelsConfig cfg;
    read(j, "alphas", cfg.alphas);
    read(j, "fuzz_count", cfg.fuzz_count);
    read(j, "n_max", cfg.n_max);
    read(j, "r_max", cfg.r_max);
    read(j, "uniform", cfg.uniform);
    read(j, "dgs_histories", cfg.dgs_histories);
    read(j, "dgs_levels", cfg.dgs_levels);
    read(j, "seed", cfg.seed);
    if (j.contains("mesh_nodes")) {
        std::vector<double> nodes;
        read(j, "mesh_nodes", nodes);
        cfg.mesh_nodes = nodes;
    }
    require_alphas(cfg.alphas, false);
    require(cfg.fuzz_count >= 0 && cfg.dgs_histories >= 0, "counts must be nonnegative");
    require(cfg.n_max >= 2 && cfg.dgs_levels >= 1, "n_max must be at least 2 and dgs_levels at least 1");
    require(cfg.r_max >= 1.0, "r_max must be at least 1");
    if (cfg.mesh_nodes) {
        try {
            TimeMesh::from_nodes(*cfg.mesh_nodes);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("mesh_nodes: ") + e.what());
        }
    }
    return cfg;
}

bool KernelsResult::ok() const {
    for (const auto& r : per_alpha) {
        if (!r.compliant.ok() || r.dgs.max_residual > dgs_tolerance || r.dgs.min_G < 0.0 || r.dgs.min_R < 0.0) {
            return false;
        }
    }
    return true;
}

KernelsResult run_kernel_audit(const KernelsConfig& cfg) {
    KernelsResult result;
    for (std::size_t ia = 0; ia < cfg.alphas.size(); ++ia) {
        const double alpha = cfg.alphas[ia];
        const FracOrder order(alpha);
        const double r_star = rstar(alpha);
        KernelsAlphaResult res;
        res.alpha = alpha;
        auto audit = [&](const TimeMesh& mesh) {
            const int n_max = std::min(cfg.n_max, mesh.steps());
            if (n_max < 2) return;
            const AuditReport rep = audit_kernel_properties(mesh, order, n_max);
            if (check_ratio_constraint(mesh, r_star).ok()) {
                res.compliant.merge(rep);
            } else {
                res.noncompliant.merge(rep);
            }
            ++res.meshes;
        };
        if (cfg.uniform) {
            const std::vector<double> steps(static_cast<std::size_t>(cfg.n_max), 1.0 / cfg.n_max);
            audit(TimeMesh::from_steps(steps));
        }
        if (cfg.mesh_nodes) audit(TimeMesh::from_nodes(*cfg.mesh_nodes));
        for (int m = 0; m < cfg.fuzz_count; ++m) {
            audit(random_admissible_mesh(cfg.n_max, r_star, cfg.r_max, mix_seed(cfg.seed, ia, m)));
        }

        std::mt19937_64 rng(mix_seed(cfg.seed, ia, 1u << 20));
        for (int h = 0; h < cfg.dgs_histories; ++h) {
            const TimeMesh mesh = random_admissible_mesh(cfg.dgs_levels, r_star, cfg.r_max, rng());
            std::vector<double> v(static_cast<std::size_t>(cfg.dgs_levels) + 1);
            for (double& x : v) x = uniform_pm1(rng);
            const DgsCheck c = dgs_identity_check(mesh, order, v);
            res.dgs.max_residual = std::max(res.dgs.max_residual, c.max_residual);
            res.dgs.min_G = std::min(res.dgs.min_G, c.min_G);
            res.dgs.min_R = std::min(res.dgs.min_R, c.min_R);
        }
        result.per_alpha.push_back(std::move(res));
    }
    return result;
}

// ---------------------------------------------------------------- accuracy

AccuracyConfig parse_accuracy_config(const std::string& text) {
    const json j = parse_json(text);
    check_keys(j, {"alpha", "sigma", "gammas", "N", "M", "epsilon2", "T", "laplacian", "seed"});
    AccuracyConfig cfg;
    read(j, "alpha", cfg.alpha);
    read(j, "sigma", cfg.sigma);
    read(j, "gammas", cfg.gammas);
    read(j, "N", cfg.N);
    read(j, "M", cfg.M);
    read(j, "epsilon2", cfg.epsilon2);
    read(j, "T", cfg.T);
    read(j, "seed", cfg.seed);
    std::string lap = "discrete";
    read(j, "laplacian", lap);
    require(lap == "discrete" || lap == "continuous", "laplacian must be 'discrete' or 'continuous'");
    cfg.laplacian = lap == "discrete" ? ForcingLaplacian::Discrete : ForcingLaplacian::Continuous;
    require(cfg.alpha > 0.0 && cfg.alpha < 1.0, "alpha must lie in (0, 1)");
    require(cfg.sigma > 0.0 && cfg.sigma < 1.0, "sigma must lie in (0, 1)");
    require(!cfg.gammas.empty(), "gammas is empty");
    for (double g : cfg.gammas) require(g >= 1.0, "grading parameters must be >= 1");
    require(cfg.N.size() >= 4, "order fits need at least four N levels");
    for (int n : cfg.N) require(n >= 2, "N values must be >= 2");
    require(cfg.M >= 4, "M must be >= 4");
    require(cfg.epsilon2 > 0.0, "epsilon2 must be positive");
    require(cfg.T > 0.0, "T must be positive");
    for (double g : cfg.gammas) {
        for (int n : cfg.N) {
            const TwoPhaseLayout l = two_phase_layout(cfg.T, g, n);
            require(l.N1 > 0 || l.T0 == cfg.T,
                    "N = " + std::to_string(n) + " leaves no random phase for gamma = " + fmt(g));
        }
    }
    return cfg;
}

double manufactured_error(const AccuracyConfig& cfg, double gamma, int N, int M) {
    SolverConfig sc;
    sc.alpha = cfg.alpha;
    sc.epsilon = std::sqrt(cfg.epsilon2);
    sc.grid = Grid2D(M, 2.0 * std::numbers::pi);
    sc.forcing = ManufacturedForcing{cfg.sigma, cfg.laplacian};
    const TimeMesh mesh = build_two_phase_mesh(cfg.T, gamma, N, cfg.seed);
    double err = 0.0;
    PhaseField diff(sc.grid);
    RunOptions opts;
    opts.record_energy = false;
    opts.observer = [&](int, double t, const PhaseField& phi) {
        const PhaseField exact = manufactured_solution(cfg.sigma, sc.grid, t);
        for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = exact[p] - phi[p];
        err = std::max(err, norm_l2(diff, sc.grid));
    };
    run(sc, mesh, manufactured_solution(cfg.sigma, sc.grid, 0.0), opts);
    return err;
}

AccuracyResult run_accuracy(const AccuracyConfig& cfg) {
    AccuracyResult res;
    res.smallest_error = std::numeric_limits<double>::infinity();
    for (double gamma : cfg.gammas) {
        std::vector<int> ns;
        std::vector<double> es;
        AccuracyGammaFit gf;
        gf.gamma = gamma;
        gf.decreasing = true;
        for (int N : cfg.N) {
            AccuracyRow row{gamma, N, 0.0, false, ""};
            try {
                row.error = manufactured_error(cfg, gamma, N, cfg.M);
                row.ok = true;
                if (!es.empty() && !(row.error < es.back())) gf.decreasing = false;
                ns.push_back(N);
                es.push_back(row.error);
                res.smallest_error = std::min(res.smallest_error, row.error);
            } catch (const ConvergenceError& e) {
                row.message = e.what();
                res.solver_failure = true;
                gf.decreasing = false;
            }
            res.rows.push_back(row);
        }
        if (ns.size() >= 4) gf.fit = fit_order(ns, es);
        res.fits.push_back(gf);
    }
    if (cfg.laplacian == ForcingLaplacian::Continuous && !cfg.gammas.empty()) {
        // Same time mesh on M and 2M; the temporal error cancels in the difference.
        const double g = cfg.gammas.back();
        const int N = cfg.N.back();
        try {
            const double e1 = manufactured_error(cfg, g, N, cfg.M);
            const double e2 = manufactured_error(cfg, g, N, 2 * cfg.M);
            res.spatial_error = 4.0 / 3.0 * std::abs(e1 - e2);
        } catch (const ConvergenceError&) {
            res.solver_failure = true;
        }
    }
    return res;
}

// ---------------------------------------------------------------- coarsen

CoarsenConfig parse_coarsen_config(const std::string& text, bool quick) {
    const json j = parse_json(text);
    check_keys(j, {"alphas", "etas", "M", "epsilon", "amplitude", "T", "tau_min", "tau_max", "warmup",
                   "enforce_cap", "snapshot_times", "seed"});
    CoarsenConfig cfg;
    read(j, "alphas", cfg.alphas);
    read(j, "etas", cfg.etas);
    read(j, "M", cfg.M);
    read(j, "epsilon", cfg.epsilon);
    read(j, "amplitude", cfg.amplitude);
    read(j, "T", cfg.T);
    read(j, "tau_min", cfg.tau_min);
    read(j, "tau_max", cfg.tau_max);
    read(j, "enforce_cap", cfg.enforce_cap);
    read(j, "snapshot_times", cfg.snapshot_times);
    read(j, "seed", cfg.seed);
    if (j.contains("warmup")) {
        const json& w = j.at("warmup");
        require(w.is_object(), "warmup must be an object");
        check_keys(w, {"gamma", "N0", "T0"});
        read(w, "gamma", cfg.warmup_gamma);
        read(w, "N0", cfg.warmup_N0);
        read(w, "T0", cfg.warmup_T0);
    }
    if (quick) {
        cfg.T = 5.0;
        cfg.M = 64;
    }
    require_alphas(cfg.alphas, false);
    require(!cfg.etas.empty(), "etas is empty");
    for (double e : cfg.etas) require(e >= 0.0, "eta must be nonnegative");
    require(cfg.M >= 4, "M must be >= 4");
    require(cfg.epsilon > 0.0 && cfg.amplitude >= 0.0, "epsilon must be positive and amplitude nonnegative");
    require(cfg.tau_min > 0.0 && cfg.tau_max >= cfg.tau_min, "need 0 < tau_min <= tau_max");
    require(cfg.warmup_gamma >= 1.0 && cfg.warmup_N0 >= 1 && cfg.warmup_T0 > 0.0, "bad warm-up mesh");
    require(cfg.T > cfg.warmup_T0, "T must exceed the warm-up interval");
    return cfg;
}

PhaseField random_initial_field(const Grid2D& grid, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PhaseField u(grid);
    for (double& v : u.values()) v = amplitude * uniform_pm1(rng);
    return u;
}

SolveTrajectory run_coarsening(const CoarsenConfig& cfg, double alpha, double eta) {
    SolverConfig sc;
    sc.alpha = alpha;
    sc.epsilon = cfg.epsilon;
    sc.grid = Grid2D(cfg.M, 2.0 * std::numbers::pi);
    sc.enforce_bound = cfg.enforce_cap;

    AdaptivePlan plan;
    plan.warmup = build_graded_mesh(cfg.warmup_T0, cfg.warmup_N0, cfg.warmup_gamma);
    plan.final_time = cfg.T;
    plan.controller.tau_min = cfg.tau_min;
    plan.controller.tau_max = cfg.tau_max;
    plan.controller.eta = eta;
    plan.controller.r_star = rstar(alpha);
    if (cfg.enforce_cap) plan.controller.physical_cap = step_size_cap(alpha, sc.grid.h(), sc.epsilon);

    RunOptions opts;
    for (double t : cfg.snapshot_times) {
        if (t <= cfg.T) opts.snapshot_times.push_back(t);
    }
    // same initial data for every alpha and eta
    return run(sc, plan, random_initial_field(sc.grid, cfg.amplitude, cfg.seed), opts);
}

CoarsenSummary summarize(const SolveTrajectory& traj, double alpha, double eta, int warmup_steps) {
    CoarsenSummary s;
    s.alpha = alpha;
    s.eta = eta;
    s.steps = traj.mesh.steps();
    s.warnings = traj.warnings();
    const std::vector<EnergyRecord> en = traj.energies();
    for (const auto& l : traj.levels) s.max_norm = std::max(s.max_norm, l.max_norm);
    if (!en.empty()) {
        s.E_start = en.front().E;
        s.E_end = en.back().E;
    }
    for (std::size_t i = 0; i < en.size(); ++i) {
        s.max_gap = std::max(s.max_gap, std::abs(en[i].E_alpha - en[i].E));
        if (i > 0) {
            const double tol = kDissipationTolerance * (1.0 + std::abs(en[i].E));
            if (en[i].E > en[i - 1].E + tol) s.E_nonincreasing = false;
        }
    }
    s.dissipation = dissipation_audit(en, traj.mesh, alpha, traj.cap);
    s.E_alpha_nonincreasing = s.dissipation.non_monotone.empty();

    // controller steps only; the warm-up ratios are fixed by the grading
    std::vector<double> logs;
    for (int k = warmup_steps + 2; k <= traj.mesh.steps(); ++k) logs.push_back(std::log(traj.mesh.ratio(k)));
    if (logs.size() >= 2) {
        const double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / logs.size();
        double ss = 0.0;
        for (double x : logs) ss += (x - mean) * (x - mean);
        s.step_fluctuation = std::sqrt(ss / (logs.size() - 1));
    }
    return s;
}

namespace {

// ---------------------------------------------------------------- output

struct Meta {
    std::string command;
    std::uint64_t hash = 0;
    std::uint64_t seed = 0;
};

std::string hex(std::uint64_t v) {
    std::ostringstream s;
    s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ofstream open_csv(const std::filesystem::path& path, const Meta& meta) {
    std::ofstream out = open_out(path);
    out << "# fracstep " << meta.command << " config_hash=" << hex(meta.hash) << " seed=" << meta.seed << '\n';
    out << std::setprecision(12);
    return out;
}

void write_manifest(const std::filesystem::path& dir, const Meta& meta, const json& config, const json& results) {
    json m;
    m["command"] = meta.command;
    m["config_hash"] = hex(meta.hash);
    m["seed"] = meta.seed;
    m["config"] = config;
    m["results"] = results;
    open_out(dir / "manifest.json") << m.dump(2) << '\n';
}

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_rstar(const std::string& text, const std::filesystem::path& out, const Meta& meta, json& results) {
    const json j = parse_json(text);
    check_keys(j, {"alphas", "seed"});
    std::vector<double> alphas{1e-8};
    for (int i = 1; i <= 19; ++i) alphas.push_back(0.05 * i);
    alphas.push_back(1.0 - 1e-8);
    read(j, "alphas", alphas);
    require_alphas(alphas, true);
    const RstarTable table = rstar_table(alphas);

    std::ofstream csv = open_csv(out / "rstar.csv", meta);
    csv << "alpha,r_star,residual\n";
    for (const auto& r : table.rows) {
        csv << std::setprecision(12) << r.alpha << ',' << std::fixed << std::setprecision(12) << r.r_star
            << std::defaultfloat << ',' << std::setprecision(3) << r.residual << '\n';
        std::cout << "alpha " << r.alpha << "  r* " << std::setprecision(12) << r.r_star << '\n';
    }
    results["monotone"] = table.monotone;
    results["max_residual"] = table.max_residual;
    const bool ok = table.monotone && table.max_residual <= 1e-11;
    if (!table.monotone) std::cerr << "rstar: roots are not increasing in alpha\n";
    if (table.max_residual > 1e-11) std::cerr << "rstar: residual " << table.max_residual << " above 1e-11\n";
    return ok ? kExitOk : kExitAudit;
}

int cmd_kernels(const std::string& text, bool quick, std::optional<std::uint64_t> seed,
                const std::filesystem::path& out, Meta& meta, json& results) {
    KernelsConfig cfg = parse_kernels_config(text);
    if (seed) cfg.seed = *seed;
    if (quick) {
        cfg.fuzz_count = std::min(cfg.fuzz_count, 10);
        cfg.dgs_histories = std::min(cfg.dgs_histories, 10);
    }
    meta.seed = cfg.seed;
    const KernelsResult res = run_kernel_audit(cfg);

    std::ofstream summary = open_csv(out / "kernels_summary.csv", meta);
    summary << "alpha,meshes,compliant,property,checks,violations,nonpositive,min_slack,min_relative_slack\n";
    std::ofstream dgs = open_csv(out / "dgs.csv", meta);
    dgs << "alpha,histories,max_residual,min_G,min_R\n";
    std::ofstream viol = open_csv(out / "audit_violations.csv", meta);
    AuditReport all;
    for (const auto& r : res.per_alpha) {
        for (const auto* rep : {&r.compliant, &r.noncompliant}) {
            const int compliant = rep == &r.compliant ? 1 : 0;
            for (const auto& [prop, s] : rep->summary) {
                summary << r.alpha << ',' << r.meshes << ',' << compliant << ',' << prop << ',' << s.checks << ','
                        << s.violations << ',' << s.nonpositive << ',' << s.min_slack << ',' << s.min_relative_slack
                        << '\n';
            }
            all.merge(*rep);
        }
        dgs << r.alpha << ',' << cfg.dgs_histories << ',' << r.dgs.max_residual << ',' << r.dgs.min_G << ','
            << r.dgs.min_R << '\n';
        std::cout << "alpha " << r.alpha << ": " << r.compliant.checks << " checks, " << r.compliant.violations
                  << " violations; dgs residual " << r.dgs.max_residual << '\n';
        if (r.noncompliant.checks > 0) {
            std::cout << "  ratio-violating mesh: " << r.noncompliant.violations << " of " << r.noncompliant.checks
                      << " checks fail (not counted)\n";
        }
    }
    write_audit_csv(viol, all);
    results["ok"] = res.ok();
    results["violations"] = all.violations;
    results["checks"] = all.checks;
    return res.ok() ? kExitOk : kExitAudit;
}

int cmd_accuracy(const std::string& text, std::optional<std::uint64_t> seed, const std::filesystem::path& out,
                 Meta& meta, json& results) {
    AccuracyConfig cfg = parse_accuracy_config(text);
    if (seed) cfg.seed = *seed;
    meta.seed = cfg.seed;
    const AccuracyResult res = run_accuracy(cfg);

    std::ofstream csv = open_csv(out / "accuracy.csv", meta);
    csv << "gamma,N,error,fitted_order,fit_residual\n";
    for (const auto& row : res.rows) {
        const auto gf = std::find_if(res.fits.begin(), res.fits.end(),
                                     [&](const AccuracyGammaFit& f) { return f.gamma == row.gamma; });
        csv << row.gamma << ',' << row.N << ',';
        if (row.ok) csv << row.error;
        csv << ',';
        if (gf->fit) csv << gf->fit->order << ',' << gf->fit->residual;
        else csv << ',';
        csv << '\n';
        if (!row.ok) std::cerr << "gamma " << row.gamma << " N " << row.N << ": " << row.message << '\n';
    }
    json fits = json::array();
    for (const auto& f : res.fits) {
        json e{{"gamma", f.gamma}, {"decreasing", f.decreasing}};
        if (f.fit) {
            e["order"] = f.fit->order;
            e["fit_residual"] = f.fit->residual;
            std::cout << "gamma " << f.gamma << ": order " << std::setprecision(4) << f.fit->order << " (residual "
                      << f.fit->residual << ")\n";
        }
        fits.push_back(e);
    }
    results["fits"] = fits;
    results["spatial_error"] = res.spatial_error;
    results["smallest_error"] = json_number(res.smallest_error);
    const double share = res.spatial_error / res.smallest_error;
    results["spatial_share"] = json_number(share);
    if (share >= 0.1) {
        std::cerr << "warning: spatial error is " << share * 100.0 << "% of the smallest temporal error\n";
    }
    return res.solver_failure ? kExitSolver : kExitOk;
}

int cmd_coarsen(const std::string& text, bool quick, std::optional<std::uint64_t> seed,
                const std::filesystem::path& out, Meta& meta, json& results) {
    CoarsenConfig cfg = parse_coarsen_config(text, quick);
    if (seed) cfg.seed = *seed;
    meta.seed = cfg.seed;

    std::ofstream summary = open_csv(out / "coarsen_summary.csv", meta);
    summary << "alpha,eta,steps,max_norm,E_start,E_end,max_gap,step_fluctuation,warnings,"
               "dissipation_violations,E_nonincreasing,E_alpha_nonincreasing\n";
    json runs = json::array();
    int code = kExitOk;
    for (double alpha : cfg.alphas) {
        for (double eta : cfg.etas) {
            const std::string tag = "a" + fmt(alpha) + "_eta" + fmt(eta);
            std::cout << "coarsen alpha " << alpha << " eta " << eta << " ..." << std::flush;
            SolveTrajectory traj;
            try {
                traj = run_coarsening(cfg, alpha, eta);
            } catch (const BoundViolation& e) {
                std::cerr << "\n" << tag << ": " << e.what() << '\n';
                code = std::max(code, static_cast<int>(kExitAudit));
                continue;
            } catch (const ConvergenceError& e) {
                std::cerr << "\n" << tag << ": " << e.what() << '\n';
                code = kExitSolver;
                continue;
            }
            const CoarsenSummary s = summarize(traj, alpha, eta, cfg.warmup_N0);

            std::ofstream energy = open_csv(out / ("energy_" + tag + ".csv"), meta);
            write_energy_csv_header(energy);
            for (const auto& l : traj.levels) write_energy_csv_row(energy, *l.energy, l.t, l.tau, l.max_norm, l.fp_iters);
            std::ofstream steps = open_csv(out / ("steps_" + tag + ".csv"), meta);
            write_mesh_csv(steps, traj.mesh);
            const Grid2D grid(cfg.M, 2.0 * std::numbers::pi);
            for (const auto& snap : traj.snapshots) {
                const std::string base = "snap_" + tag + "_t" + fmt(snap.requested_time);
                std::ofstream pgm = open_out(out / (base + ".pgm"), true);
                write_pgm(pgm, snap.field);
                std::ofstream bin = open_out(out / (base + ".bin"), true);
                write_binary(bin, snap.field, grid);
            }

            std::size_t compliant_violations = 0;
            for (const auto& v : s.dissipation.violations) {
                if (!v.step_over_cap && !v.ratio_below_rstar) ++compliant_violations;
            }
            if (compliant_violations > 0 || (cfg.enforce_cap && !s.E_alpha_nonincreasing)) {
                code = std::max(code, static_cast<int>(kExitAudit));
            }
            summary << alpha << ',' << eta << ',' << s.steps << ',' << s.max_norm << ',' << s.E_start << ','
                    << s.E_end << ',' << s.max_gap << ',' << s.step_fluctuation << ',' << s.warnings << ','
                    << s.dissipation.violations.size() << ',' << s.E_nonincreasing << ','
                    << s.E_alpha_nonincreasing << '\n';
            runs.push_back({{"alpha", alpha},
                            {"eta", eta},
                            {"steps", s.steps},
                            {"max_norm", s.max_norm},
                            {"max_gap", s.max_gap},
                            {"step_fluctuation", s.step_fluctuation},
                            {"dissipation_violations", s.dissipation.violations.size()},
                            {"warnings", s.warnings}});
            std::cout << " " << s.steps << " steps, max|phi| " << s.max_norm << ", E " << s.E_start << " -> "
                      << s.E_end << '\n';
        }
    }
    results["runs"] = runs;
    return code;
}

}  // namespace

int run_command(const ExperimentSpec& spec) {
    std::string text;
    {
        std::ifstream in(spec.config);
        if (!in) {
            std::cerr << "cannot read config " << spec.config << '\n';
            return kExitConfig;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    std::error_code ec;
    std::filesystem::create_directories(spec.out_dir, ec);
    if (ec || !std::filesystem::is_directory(spec.out_dir)) {
        std::cerr << "cannot create output directory " << spec.out_dir << '\n';
        return kExitConfig;
    }

    Meta meta{spec.command, config_hash(text), spec.seed.value_or(0)};
    json results;
    try {
        int code = kExitOk;
        if (spec.command == "rstar") {
            code = cmd_rstar(text, spec.out_dir, meta, results);
        } else if (spec.command == "kernels") {
            code = cmd_kernels(text, spec.quick, spec.seed, spec.out_dir, meta, results);
        } else if (spec.command == "accuracy") {
            code = cmd_accuracy(text, spec.seed, spec.out_dir, meta, results);
        } else if (spec.command == "coarsen") {
            code = cmd_coarsen(text, spec.quick, spec.seed, spec.out_dir, meta, results);
        } else {
            std::cerr << "unknown command '" << spec.command << "'\n";
            return kExitConfig;
        }
        results["exit_code"] = code;
        write_manifest(spec.out_dir, meta, parse_json(text), results);
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConvergenceError& e) {
        std::cerr << e.what() << '\n';
        return kExitSolver;
    }
}

}  // namespace fracstep
