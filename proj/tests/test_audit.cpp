#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "fracstep/audit.hpp"

using namespace fracstep;

TEST_CASE("beta sequence") {
    CHECK(beta_ratio(1.0, 1.0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(beta_ratio(0.0, 1.0) == doctest::Approx(2.0 / 2.0).epsilon(1e-15));
}

TEST_CASE("bridging integrals satisfy the coefficient identities") {
    for (double alpha : {0.2, 0.5, 0.8}) {
        const FracOrder order(alpha);
        const double theta = 0.5 * alpha;
        const TimeMesh mesh = random_admissible_mesh(12, rstar(alpha), 4.0, 21);
        for (int n = 2; n <= 12; ++n) {
            const DiagnosticSet d = diagnostics(mesh, order, n);
            const KernelSet k = build_kernels(mesh, order, n);
            const double T = mesh.offset_node(n, theta);
            CHECK(d.max_error_estimate <= 1e-8);
            for (int kk = 1; kk <= n - 1; ++kk) {
                const int j = n - kk;
                const double wl = history_weight(T, mesh.node(kk - 1), alpha);
                const double wr = history_weight(T, mesh.node(kk), alpha);
                CHECK(k.a[j] - wl == doctest::Approx(d.I[j]).epsilon(1e-9));
                CHECK(wr - k.a[j] == doctest::Approx(d.J[j]).epsilon(1e-9));
                if (j >= 2) CHECK(k.a[j - 1] - k.a[j] == doctest::Approx(d.I[j - 1] + d.J[j]).epsilon(1e-9));
            }
            const double lhs = 4.0 * (1.0 - alpha) / (2.0 - alpha) * k.a[0] - k.a[1];
            CHECK(lhs == doctest::Approx(history_weight(T, mesh.node(n - 1), alpha) + d.J[1]).epsilon(1e-9));
            for (int kk = 2; kk <= n; ++kk) CHECK(d.beta[kk] == beta_ratio(alpha, mesh.ratio(kk)));
        }
    }
    CHECK_THROWS(diagnostics(build_graded_mesh(1.0, 4, 1.0), FracOrder(0.5), 1));
}

TEST_CASE("uniform mesh passes the audit") {
    const std::vector<double> steps(20, 0.05);
    const AuditReport rep = audit_kernel_properties(TimeMesh::from_steps(steps), FracOrder(0.5), 20);
    CHECK(rep.ok());
    CHECK(rep.checks > 1000);
    for (const char* p : {"A_positive", "A_monotone", "A_level_decay", "A_convexity", "zeta_level_decay",
                          "zeta_ratio", "zeta_ratio_level", "zeta_head", "I_beta", "I_beta_level", "J_three",
                          "J_three_level"}) {
        REQUIRE(rep.summary.count(p) == 1);
        CHECK(rep.summary.at(p).checks > 0);
        CHECK(rep.summary.at(p).min_slack > 0.0);
    }
}

TEST_CASE("graded warm-up mesh passes the audit") {
    const TimeMesh mesh = build_graded_mesh(0.01, 30, 3.0);
    for (double alpha : {0.4, 0.7, 0.9}) {
        const AuditReport rep = audit_kernel_properties(mesh, FracOrder(alpha), 30);
        CHECK(rep.ok());
    }
}

TEST_CASE("fuzzed admissible meshes pass the audit") {
    for (double alpha : {0.1, 0.5, 0.9}) {
        AuditReport total;
        for (std::uint64_t s = 0; s < 10; ++s) {
            total.merge(audit_kernel_properties(random_admissible_mesh(15, rstar(alpha), 4.0, s), FracOrder(alpha), 15));
        }
        CHECK(total.ok());
    }
}

TEST_CASE("ratio-violating mesh is audited without throwing") {
    std::vector<double> steps{1.0, 1.0, 1.0, 0.3, 1.0, 1.0, 1.0, 0.3, 0.09, 0.027};
    const TimeMesh mesh = TimeMesh::from_steps(steps);
    AuditOptions opts;
    opts.record_all = true;
    AuditReport rep;
    CHECK_NOTHROW(rep = audit_kernel_properties(mesh, FracOrder(0.5), 10, opts));
    CHECK(rep.entries.size() == static_cast<std::size_t>(rep.checks));

    std::ostringstream out;
    write_audit_csv(out, rep);
    CHECK(out.str().rfind("n,property,k,lhs,rhs,slack\n", 0) == 0);
}

TEST_CASE("report merge adds up") {
    const std::vector<double> steps(6, 0.1);
    const TimeMesh mesh = TimeMesh::from_steps(steps);
    const AuditReport a = audit_kernel_properties(mesh, FracOrder(0.3), 6);
    AuditReport b = a;
    b.merge(a);
    CHECK(b.checks == 2 * a.checks);
    CHECK(b.summary.at("A_monotone").checks == 2 * a.summary.at("A_monotone").checks);
}
