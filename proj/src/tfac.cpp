#include "fracstep/tfac.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fracstep/special.hpp"

namespace fracstep {

void SolverConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("solver: alpha must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("solver: epsilon must be positive");
    if (!(fixed_point_tol > 0.0) || fixed_point_max_iter < 1) {
        throw std::invalid_argument("solver: fixed-point tolerance and iteration budget must be positive");
    }
    if (!(linear_tol > 0.0) || linear_max_iter < 1) {
        throw std::invalid_argument("solver: linear tolerance and iteration budget must be positive");
    }
    if (forcing) {
        if (!(forcing->sigma > 0.0 && forcing->sigma < 1.0)) {
            throw std::invalid_argument("solver: manufactured sigma must lie in (0, 1)");
        }
        if (std::abs(grid.L() - 2.0 * std::numbers::pi) > 1e-12) {
            throw std::invalid_argument("solver: manufactured solution needs the domain (0, 2pi)^2");
        }
    }
}

double step_size_cap(double alpha, double h, double epsilon) {
    const double theta = 0.5 * alpha;
    const double w = omega(2.0 - alpha, 1.0 - theta);
    const double first = std::pow(theta * w / (2.0 * (1.0 - theta)), 1.0 / alpha);
    const double second = std::pow(h * h * w / (4.0 * epsilon * epsilon), 1.0 / alpha);
    return std::min(first, second);
}

void DirectHistorySum::accumulate(const KernelSet& kernels, std::span<const PhaseField> history,
                                  PhaseField& out) const {
    const std::size_t n = static_cast<std::size_t>(kernels.level);
    if (history.size() != n) throw std::invalid_argument("history sum: need phi^0..phi^{n-1}");
    std::fill(out.values().begin(), out.values().end(), 0.0);
    if (n < 2) return;
    const std::size_t size = out.size();
    std::vector<double> comp(size, 0.0);
    double* s = out.values().data();
    // Kahan summation per grid point, ascending k.
    for (std::size_t k = 1; k < n; ++k) {
        const double w = kernels.hat_a[n - k];
        const double* cur = history[k].values().data();
        const double* prev = history[k - 1].values().data();
        for (std::size_t p = 0; p < size; ++p) {
            const double y = w * (cur[p] - prev[p]) - comp[p];
            const double t = s[p] + y;
            comp[p] = (t - s[p]) - y;
            s[p] = t;
        }
    }
}

namespace {

double cubic(double v) { return v * v * v - v; }

double cubic_prime(double v) { return 3.0 * v * v - 1.0; }

// Solves (diag(c) - kappa Lap_h) x = b by Jacobi-preconditioned CG, warm-started
// from x. c must be positive. Returns the iteration count.
int solve_shifted(const Grid2D& grid, const PhaseField& c, double kappa, const PhaseField& b, PhaseField& x,
                  double tol, int max_iter, int level) {
    const std::size_t size = b.size();
    const double offdiag = 4.0 * kappa / (grid.h() * grid.h());
    PhaseField lap(grid);
    auto apply = [&](const PhaseField& u, PhaseField& out) {
        apply_laplacian(u, grid, lap);
        for (std::size_t p = 0; p < size; ++p) out[p] = c[p] * u[p] - kappa * lap[p];
    };
    auto dot = [&](const PhaseField& u, const PhaseField& v) {
        CompensatedSum s;
        for (std::size_t p = 0; p < size; ++p) s.add(u[p] * v[p]);
        return s.value();
    };

    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) {
        std::fill(x.values().begin(), x.values().end(), 0.0);
        return 0;
    }
    PhaseField r(grid), z(grid), p(grid), q(grid);
    apply(x, q);
    for (std::size_t i = 0; i < size; ++i) r[i] = b[i] - q[i];
    double rnorm = std::sqrt(dot(r, r));
    if (rnorm <= tol * bnorm) return 0;
    for (std::size_t i = 0; i < size; ++i) z[i] = r[i] / (c[i] + offdiag);
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        apply(p, q);
        const double step = rz / dot(p, q);
        for (std::size_t i = 0; i < size; ++i) {
            x[i] += step * p[i];
            r[i] -= step * q[i];
        }
        rnorm = std::sqrt(dot(r, r));
        if (rnorm <= tol * bnorm) return it;
        for (std::size_t i = 0; i < size; ++i) z[i] = r[i] / (c[i] + offdiag);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < size; ++i) p[i] = z[i] + beta * p[i];
    }
    std::ostringstream msg;
    msg << "linear solve did not reach relative residual " << tol << " at level " << level
        << " (got " << rnorm / bnorm << ")";
    throw ConvergenceError(msg.str(), level, rnorm / bnorm);
}

double max_change(const PhaseField& a, const PhaseField& b) {
    double m = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) m = std::max(m, std::abs(a[p] - b[p]));
    return m;
}

// Newton iteration for (c I - kappa Lap) phi = base - w_new f(phi). Where
// c + w_new f' would drop below c/2 the slope is clamped, which keeps every
// linear system positive definite at the price of a linear rate there.
StepResult newton(const SolverConfig& cfg, double c, double kappa, double w_new, const PhaseField& base,
                  const PhaseField& guess, int level) {
    const Grid2D& grid = cfg.grid;
    StepResult out;
    out.phi = guess;
    PhaseField rhs(grid);
    PhaseField next(grid);
    PhaseField diag(grid);
    const double slope_floor = -0.5 * c / w_new;
    for (int it = 1; it <= cfg.fixed_point_max_iter; ++it) {
        for (std::size_t p = 0; p < rhs.size(); ++p) {
            const double u = out.phi[p];
            const double slope = std::max(cubic_prime(u), slope_floor);
            rhs[p] = base[p] - w_new * (cubic(u) - slope * u);
            diag[p] = c + w_new * slope;
        }
        next = out.phi;
        solve_shifted(grid, diag, kappa, rhs, next, cfg.linear_tol, cfg.linear_max_iter, level);
        out.residual = max_change(next, out.phi);
        std::swap(out.phi, next);
        out.iterations = it;
        if (out.residual <= cfg.fixed_point_tol) return out;
    }
    std::ostringstream msg;
    msg << "fixed-point iteration did not converge at level " << level << " after "
        << cfg.fixed_point_max_iter << " sweeps (last change " << out.residual << ")";
    throw ConvergenceError(msg.str(), level, out.residual);
}

}  // namespace

StepResult step(std::span<const PhaseField> history, const TimeMesh& mesh, const KernelSet& kernels,
                const SolverConfig& cfg, const HistorySum* backend) {
    const int n = kernels.level;
    if (history.size() != static_cast<std::size_t>(n) || n < 1 || n > mesh.steps()) {
        throw std::invalid_argument("step: history must hold phi^0..phi^{n-1} for level-n kernels");
    }
    const Grid2D& grid = cfg.grid;
    const FracOrder order(cfg.alpha);
    const double theta = order.theta();
    const double eps2 = cfg.epsilon * cfg.epsilon;
    const double tau = mesh.tau(n);
    const double cap = step_size_cap(cfg.alpha, grid.h(), cfg.epsilon);
    if (cfg.enforce_bound && tau > cap * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "step " << n << ": tau = " << tau << " exceeds the maximum-bound cap " << cap;
        throw std::domain_error(msg.str());
    }

    const PhaseField& last = history.back();
    const double c = local_coefficient(kernels, order) + kernels.hat_a[0];

    PhaseField hist(grid);
    static const DirectHistorySum direct;
    (backend ? backend : &direct)->accumulate(kernels, history, hist);

    PhaseField lap_last = laplacian(last, grid);
    PhaseField base(grid);
    for (std::size_t p = 0; p < base.size(); ++p) {
        base[p] = c * last[p] - hist[p] - theta * cubic(last[p]) + theta * eps2 * lap_last[p];
    }
    if (cfg.forcing) {
        const PhaseField g = manufactured_force(*cfg.forcing, cfg.alpha, cfg.epsilon, grid,
                                                mesh.offset_node(n, theta));
        for (std::size_t p = 0; p < base.size(); ++p) base[p] += g[p];
    }

    StepResult res = newton(cfg, c, (1.0 - theta) * eps2, 1.0 - theta, base, last, n);

    if (cfg.enforce_bound && !cfg.forcing) {
        const double r_star = rstar(cfg.alpha);
        bool hypotheses = true;
        for (int k = 2; k <= n && hypotheses; ++k) hypotheses = mesh.ratio(k) >= r_star;
        const double m = norm_inf(res.phi);
        if (hypotheses && norm_inf(history.front()) <= 1.0 && m > 1.0 + 1e-10) {
            std::ostringstream msg;
            msg << "maximum bound violated at level " << n << ": |phi|_inf = " << m;
            throw BoundViolation(msg.str(), n, m);
        }
    }
    return res;
}

StepResult crank_nicolson_step(const PhaseField& prev, double tau, const SolverConfig& cfg) {
    const Grid2D& grid = cfg.grid;
    const double eps2 = cfg.epsilon * cfg.epsilon;
    const PhaseField lap = laplacian(prev, grid);
    PhaseField base(grid);
    for (std::size_t p = 0; p < base.size(); ++p) {
        base[p] = prev[p] / tau - 0.5 * cubic(prev[p]) + 0.5 * eps2 * lap[p];
    }
    return newton(cfg, 1.0 / tau, 0.5 * eps2, 0.5, base, prev, 0);
}

PhaseField manufactured_solution(double sigma, const Grid2D& grid, double t) {
    const double amp = omega(1.0 + sigma, t);
    return sample(grid, [amp](double x, double y) { return amp * std::sin(x) * std::sin(y); });
}

PhaseField manufactured_force(const ManufacturedForcing& forcing, double alpha, double epsilon,
                              const Grid2D& grid, double t) {
    const double sigma = forcing.sigma;
    const double amp = omega(1.0 + sigma, t);
    const double caputo = omega(1.0 + sigma - alpha, t);
    // -Lap of sin(x) sin(y)
    const double lambda = forcing.laplacian == ForcingLaplacian::Continuous ? 2.0 : -laplacian_symbol(grid, 1, 1);
    const double eps2 = epsilon * epsilon;
    return sample(grid, [&](double x, double y) {
        const double s = std::sin(x) * std::sin(y);
        const double phi = amp * s;
        return caputo * s + cubic(phi) + eps2 * lambda * phi;
    });
}

std::vector<EnergyRecord> SolveTrajectory::energies() const {
    std::vector<EnergyRecord> out;
    out.reserve(levels.size());
    for (const auto& l : levels) {
        if (l.energy) out.push_back(*l.energy);
    }
    return out;
}

int SolveTrajectory::warnings() const {
    int w = 0;
    for (const auto& l : levels) w += l.cap_broke_ratio_floor ? 1 : 0;
    return w;
}

namespace {

// Drives the level loop; next_tau returns 0 when the mesh is exhausted.
class Runner {
public:
    Runner(const SolverConfig& cfg, const PhaseField& initial, const RunOptions& options)
        : cfg_(cfg), order_(cfg.alpha), options_(options) {
        cfg_.validate();
        if (initial.M() != cfg.grid.M()) throw std::invalid_argument("run: initial field does not match grid");
        traj_.r_star = rstar(cfg.alpha);
        traj_.cap = step_size_cap(cfg.alpha, cfg.grid.h(), cfg.epsilon);
        snapshot_times_ = options.snapshot_times;
        std::sort(snapshot_times_.begin(), snapshot_times_.end());
        history_.push_back(initial);

        LevelRecord rec;
        rec.max_norm = norm_inf(initial);
        if (options_.record_energy) {
            rec.energy = modified_energy(history_, nullptr, cfg.alpha, cfg.epsilon, cfg.grid);
        }
        traj_.levels.push_back(rec);
        take_snapshots(0, 0.0);
        if (options_.observer) options_.observer(0, 0.0, initial);
    }

    void advance(const TimeMesh& mesh, bool cap_broke_floor) {
        const int n = static_cast<int>(history_.size());
        KernelSet kernels = build_kernels(mesh, order_, n);
        StepResult res;
        try {
            res = step(history_, mesh, kernels, cfg_, options_.backend);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(std::string(e.what()) + " [level " + std::to_string(n) + "]", n, e.residual());
        }
        history_.push_back(std::move(res.phi));

        LevelRecord rec;
        rec.n = n;
        rec.t = mesh.node(n);
        rec.tau = mesh.tau(n);
        rec.max_norm = norm_inf(history_.back());
        rec.fp_iters = res.iterations;
        rec.fp_residual = res.residual;
        rec.over_cap = rec.tau > traj_.cap;
        rec.ratio_below_rstar = n >= 2 && mesh.ratio(n) < traj_.r_star;
        rec.cap_broke_ratio_floor = cap_broke_floor;
        if (options_.record_energy) {
            const EnergyRecord& prev = *traj_.levels.back().energy;
            rec.energy = modified_energy(history_, &kernels, cfg_.alpha, cfg_.epsilon, cfg_.grid, &prev, rec.tau);
        }
        traj_.levels.push_back(std::move(rec));
        take_snapshots(n, mesh.node(n));
        if (options_.observer) options_.observer(n, mesh.node(n), history_.back());
    }

    double last_change_norm(const TimeMesh& mesh) const {
        const int n = static_cast<int>(history_.size()) - 1;
        PhaseField d(cfg_.grid);
        for (std::size_t p = 0; p < d.size(); ++p) d[p] = (history_[n][p] - history_[n - 1][p]) / mesh.tau(n);
        return norm_l2(d, cfg_.grid);
    }

    SolveTrajectory finish(TimeMesh mesh) {
        traj_.mesh = std::move(mesh);
        if (options_.keep_fields) traj_.fields = std::move(history_);
        return std::move(traj_);
    }

private:
    void take_snapshots(int n, double t) {
        while (next_snapshot_ < snapshot_times_.size() &&
               t >= snapshot_times_[next_snapshot_] * (1.0 - 1e-12)) {
            traj_.snapshots.push_back({snapshot_times_[next_snapshot_], n, t, history_.back()});
            ++next_snapshot_;
        }
    }

    SolverConfig cfg_;
    FracOrder order_;
    const RunOptions& options_;
    std::vector<PhaseField> history_;
    SolveTrajectory traj_;
    std::vector<double> snapshot_times_;
    std::size_t next_snapshot_ = 0;
};

}  // namespace

SolveTrajectory run(const SolverConfig& cfg, const TimeMesh& mesh, const PhaseField& initial,
                    const RunOptions& options) {
    Runner runner(cfg, initial, options);
    for (int n = 1; n <= mesh.steps(); ++n) runner.advance(mesh, false);
    return runner.finish(mesh);
}

SolveTrajectory run(const SolverConfig& cfg, const AdaptivePlan& plan, const PhaseField& initial,
                    const RunOptions& options) {
    plan.controller.validate();
    if (!(plan.final_time > plan.warmup.final_time())) {
        throw std::invalid_argument("adaptive run: final time must exceed the warm-up interval");
    }
    Runner runner(cfg, initial, options);
    TimeMesh mesh;
    for (int n = 1; n <= plan.warmup.steps(); ++n) {
        mesh.push_step(plan.warmup.tau(n));
        runner.advance(mesh, false);
    }
    while (mesh.final_time() < plan.final_time) {
        const int n = mesh.steps();
        const AdaptiveStep next = adaptive_next_step(mesh.tau(n), runner.last_change_norm(mesh), plan.controller);
        mesh.push_step(next.tau);
        runner.advance(mesh, next.cap_broke_ratio_floor);
    }
    return runner.finish(std::move(mesh));
}

}  // namespace fracstep
