#include "fracstep/audit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fracstep/special.hpp"

namespace fracstep {

double beta_ratio(double alpha, double r) {
    const double b = 1.0 - 0.5 * alpha;
    return 2.0 * b * r / (1.0 + alpha + b * r);
}

DiagnosticSet diagnostics(const TimeMesh& mesh, FracOrder order, int n) {
    if (n < 2 || n > mesh.steps()) throw std::out_of_range("diagnostics need 2 <= n <= N");
    const double alpha = order.alpha();
    const double theta = order.theta();
    const double scale = alpha / std::tgamma(1.0 - alpha);

    DiagnosticSet d;
    d.level = n;
    d.I.assign(static_cast<std::size_t>(n), 0.0);
    d.J.assign(static_cast<std::size_t>(n), 0.0);
    d.beta.assign(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 2; k <= n; ++k) d.beta[static_cast<std::size_t>(k)] = beta_ratio(alpha, mesh.ratio(k));

    using Quad = boost::math::quadrature::gauss_kronrod<double, 15>;
    constexpr double tol = 1e-13;
    for (int k = 1; k <= n - 1; ++k) {
        const double tau = mesh.tau(k);
        // distance from t_k to the offset node
        const double y = (1.0 - theta) * mesh.tau(n) + (mesh.node(n - 1) - mesh.node(k));
        // s in [0,1] maps to t = t_{k-1} + s tau; t_{n-theta} - t = y + (1-s) tau
        auto w2 = [&](double s) { return scale * std::pow(y + (1.0 - s) * tau, -1.0 - alpha); };
        double err_i = 0.0;
        double err_j = 0.0;
        const double I = tau * Quad::integrate([&](double s) { return (1.0 - s) * w2(s); }, 0.0, 1.0, 20, tol, &err_i);
        const double J = tau * Quad::integrate([&](double s) { return s * w2(s); }, 0.0, 1.0, 20, tol, &err_j);
        // Boost reports |K15 - G7|, an absolute and pessimistic estimate.
        const double rel = std::max(err_i / std::abs(I / tau), err_j / std::abs(J / tau));
        if (!(rel <= 1e-8)) {
            std::ostringstream msg;
            msg << "diagnostics: quadrature did not converge at n=" << n << ", k=" << k
                << " (relative error estimate " << rel << ")";
            throw std::runtime_error(msg.str());
        }
        const auto j = static_cast<std::size_t>(n - k);
        d.I[j] = I;
        d.J[j] = J;
        d.max_error_estimate = std::max({d.max_error_estimate, err_i * tau, err_j * tau});
    }
    return d;
}

void AuditReport::merge(const AuditReport& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    violations += other.violations;
    checks += other.checks;
    for (const auto& [name, s] : other.summary) {
        PropertySummary& mine = summary[name];
        if (!mine.seen) {
            mine = s;
            continue;
        }
        mine.checks += s.checks;
        mine.violations += s.violations;
        mine.nonpositive += s.nonpositive;
        mine.min_slack = std::min(mine.min_slack, s.min_slack);
        mine.min_relative_slack = std::min(mine.min_relative_slack, s.min_relative_slack);
    }
}

namespace {

class Recorder {
public:
    Recorder(AuditReport& report, bool record_all) : report_(report), record_all_(record_all) {}

    // Claim lhs > rhs; scale is the operand magnitude for the round-off floor.
    void check(int n, const char* property, int k, double lhs, double rhs, double scale) {
        const double slack = lhs - rhs;
        const double floor = AuditReport::kSlackFloor * std::max(scale, std::numeric_limits<double>::min());
        const bool violation = !(slack >= -floor);
        const double rel = slack / std::max(scale, std::numeric_limits<double>::min());

        PropertySummary& s = report_.summary[property];
        if (!s.seen) {
            s.seen = true;
            s.min_slack = slack;
            s.min_relative_slack = rel;
        }
        ++s.checks;
        ++report_.checks;
        s.min_slack = std::min(s.min_slack, slack);
        s.min_relative_slack = std::min(s.min_relative_slack, rel);
        if (violation) {
            ++s.violations;
            ++report_.violations;
        } else if (slack <= 0.0) {
            ++s.nonpositive;
        }
        if (record_all_ || violation) report_.entries.push_back({n, property, k, lhs, rhs, slack, violation});
    }

private:
    AuditReport& report_;
    bool record_all_;
};

double amax(std::initializer_list<double> xs) {
    double m = 0.0;
    for (double x : xs) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

AuditReport audit_kernel_properties(const TimeMesh& mesh, FracOrder order, int n_max,
                                    const AuditOptions& options) {
    n_max = std::min(n_max, mesh.steps());
    AuditReport report;
    Recorder rec(report, options.record_all);
    if (n_max < 2) return report;

    const double alpha = order.alpha();
    const double theta = order.theta();
    std::vector<KernelSet> ks;
    ks.reserve(static_cast<std::size_t>(n_max) + 1);
    ks.emplace_back();  // level 0 placeholder
    for (int n = 1; n <= n_max; ++n) ks.push_back(build_kernels(mesh, order, n));
    std::vector<DiagnosticSet> ds(static_cast<std::size_t>(n_max) + 1);
    if (options.include_diagnostics) {
        for (int n = 2; n <= n_max; ++n) ds[static_cast<std::size_t>(n)] = diagnostics(mesh, order, n);
    }

    for (int n = 2; n <= n_max; ++n) {
        const auto& A = ks[static_cast<std::size_t>(n)].A;
        const auto& Ap = ks[static_cast<std::size_t>(n - 1)].A;
        const auto& z = ks[static_cast<std::size_t>(n)].zeta;
        const auto& zp = ks[static_cast<std::size_t>(n - 1)].zeta;
        auto at = [](const std::vector<double>& v, int j) { return v[static_cast<std::size_t>(j)]; };

        // (a) A_{n-k-1} > A_{n-k} > 0
        for (int j = 0; j < n; ++j) rec.check(n, "A_positive", n - j, at(A, j), 0.0, std::abs(at(A, j)));
        for (int k = 1; k <= n - 1; ++k) {
            const double l = at(A, n - k - 1), r = at(A, n - k);
            rec.check(n, "A_monotone", k, l, r, amax({l, r}));
        }
        // (b) A^{(n-1)}_{n-1-k} > A^{(n)}_{n-k}
        for (int k = 1; k <= n - 1; ++k) {
            const double l = at(Ap, n - 1 - k), r = at(A, n - k);
            rec.check(n, "A_level_decay", k, l, r, amax({l, r}));
        }
        // (c) A^{(n-1)}_{n-2-k} - A^{(n-1)}_{n-1-k} > A^{(n)}_{n-k-1} - A^{(n)}_{n-k}
        for (int k = 1; k <= n - 2; ++k) {
            const double p0 = at(Ap, n - 2 - k), p1 = at(Ap, n - 1 - k);
            const double c0 = at(A, n - k - 1), c1 = at(A, n - k);
            rec.check(n, "A_convexity", k, p0 - p1, c0 - c1, amax({p0, p1, c0, c1}));
        }
        // zeta decays across levels
        for (int k = 1; k <= n - 2; ++k) {
            const double l = at(zp, n - k - 1), r = at(z, n - k);
            rec.check(n, "zeta_level_decay", k, l, r, amax({l, r}));
        }
        // zeta_{n-k-1} > r_{k+1} zeta_{n-k}, and its level decay
        for (int k = 1; k <= n - 2; ++k) {
            const double rk1 = mesh.ratio(k + 1);
            const double l = at(z, n - k - 1), r = rk1 * at(z, n - k);
            rec.check(n, "zeta_ratio", k, l, r, amax({l, r}));
        }
        for (int k = 1; k <= n - 3; ++k) {
            const double rk1 = mesh.ratio(k + 1);
            const double cur = at(z, n - k - 1) - rk1 * at(z, n - k);
            const double prev = at(zp, n - k - 2) - rk1 * at(zp, n - k - 1);
            rec.check(n, "zeta_ratio_level", k, prev, cur,
                      amax({at(z, n - k - 1), rk1 * at(z, n - k), at(zp, n - k - 2), rk1 * at(zp, n - k - 1)}));
        }
        // r_n zeta_1 < alpha/(3(2-alpha)) w'_n(t_{n-1})
        {
            const double w1 = omega(1.0 - alpha, (1.0 - theta) * mesh.tau(n));
            const double l = alpha / (3.0 * (2.0 - alpha)) * w1;
            const double r = mesh.ratio(n) * at(z, 1);
            rec.check(n, "zeta_head", n - 1, l, r, amax({l, r}));
        }
        if (!options.include_diagnostics) continue;

        const DiagnosticSet& d = ds[static_cast<std::size_t>(n)];
        const DiagnosticSet& dp = ds[static_cast<std::size_t>(n - 1)];
        for (int k = 1; k <= n - 1; ++k) {
            const double b = d.beta[static_cast<std::size_t>(k + 1)];
            const double I = at(d.I, n - k), Z = at(z, n - k), Jv = at(d.J, n - k);
            rec.check(n, "I_beta", k, I, (1.0 + b) * Z, amax({I, (1.0 + b) * Z}));
            rec.check(n, "J_three", k, Jv, 3.0 * Z, amax({Jv, 3.0 * Z}));
        }
        for (int k = 1; k <= n - 2 && n >= 3; ++k) {
            const double b = d.beta[static_cast<std::size_t>(k + 1)];
            const double I = at(d.I, n - k), Z = at(z, n - k);
            const double Ip = at(dp.I, n - k - 1), Zp = at(zp, n - k - 1);
            rec.check(n, "I_beta_level", k, Ip - (1.0 + b) * Zp, I - (1.0 + b) * Z,
                      amax({I, (1.0 + b) * Z, Ip, (1.0 + b) * Zp}));
            const double Jv = at(d.J, n - k), Jp = at(dp.J, n - k - 1);
            rec.check(n, "J_three_level", k, Jp - 3.0 * Zp, Jv - 3.0 * Z, amax({Jv, 3.0 * Z, Jp, 3.0 * Zp}));
        }
    }
    return report;
}

void write_audit_csv(std::ostream& out, const AuditReport& report) {
    out << "n,property,k,lhs,rhs,slack\n" << std::setprecision(17);
    for (const auto& e : report.entries) {
        out << e.n << ',' << e.property << ',' << e.k << ',' << e.lhs << ',' << e.rhs << ',' << e.slack << '\n';
    }
}

}  // namespace fracstep
