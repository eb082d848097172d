#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fracstep/energy.hpp"
#include "fracstep/special.hpp"
#include "fracstep/tfac.hpp"

using namespace fracstep;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST_CASE("original energy") {
    const Grid2D g(32, kTwoPi);
    CHECK(original_energy(PhaseField(g, 1.0), 0.1, g) == 0.0);
    CHECK(original_energy(PhaseField(g, -1.0), 0.1, g) == 0.0);
    CHECK(original_energy(PhaseField(g, 0.0), 0.1, g) == doctest::Approx(kTwoPi * kTwoPi / 4.0).epsilon(1e-14));

    // sin(x) sin(y): gradient part eps^2/2 * 2 pi^2, potential part by fine-grid quadrature
    const double eps = 0.1;
    std::vector<double> err;
    const Grid2D fine(1024, kTwoPi);
    const PhaseField uf = sample(fine, [](double x, double y) { return std::sin(x) * std::sin(y); });
    CompensatedSum pot;
    for (double v : uf.values()) pot.add(double_well(v));
    const double exact = 0.5 * eps * eps * 2.0 * std::numbers::pi * std::numbers::pi + fine.h() * fine.h() * pot.value();
    for (int M : {32, 64, 128}) {
        const Grid2D gm(M, kTwoPi);
        const PhaseField u = sample(gm, [](double x, double y) { return std::sin(x) * std::sin(y); });
        err.push_back(std::abs(original_energy(u, eps, gm) - exact));
    }
    CHECK(err[1] < err[0]);
    CHECK(std::log2(err[1] / err[2]) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("modified energy reduces to E for flat histories") {
    const Grid2D g(16, kTwoPi);
    const TimeMesh mesh = build_graded_mesh(1.0, 5, 2.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PhaseField f(g);
    for (double& v : f.values()) v = u(rng);
    std::vector<PhaseField> hist(6, f);
    const EnergyRecord r0 = modified_energy(std::span<const PhaseField>(hist).first(1), nullptr, 0.5, 0.05, g);
    CHECK(r0.E_alpha == r0.E);
    const KernelSet k = build_kernels(mesh, FracOrder(0.5), 5);
    const EnergyRecord r5 = modified_energy(hist, &k, 0.5, 0.05, g, &r0, mesh.tau(5));
    CHECK(r5.G_term == 0.0);
    CHECK(r5.E_alpha == r5.E);
    CHECK(r5.dissipation_lhs == 0.0);
    CHECK_THROWS(modified_energy(hist, nullptr, 0.5, 0.05, g));
}

TEST_CASE("G term matches the scalar functional pointwise") {
    const Grid2D g(4, 2.0);
    const TimeMesh mesh = random_admissible_mesh(6, 0.4, 3.0, 3);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<PhaseField> hist(7, PhaseField(g));
    for (auto& f : hist)
        for (double& v : f.values()) v = u(rng);
    const KernelSet k = build_kernels(mesh, FracOrder(0.6), 6);
    double expect = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        std::vector<double> w;
        for (int n = 1; n <= 6; ++n) w.push_back(hist[n][p] - hist[n - 1][p]);
        expect += dgs_G(k.A, w);
    }
    expect *= 0.5 * g.h() * g.h();
    CHECK(g_term(hist, k.A, g) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("dissipation audit on a short coarsening run") {
    SolverConfig cfg;
    cfg.alpha = 0.7;
    cfg.grid = Grid2D(16, kTwoPi);
    cfg.enforce_bound = true;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    PhaseField init(cfg.grid);
    for (double& v : init.values()) v = u(rng);
    AdaptivePlan plan;
    plan.warmup = build_graded_mesh(0.01, 10, 3.0);
    plan.final_time = 2.0;
    plan.controller.r_star = rstar(0.7);
    plan.controller.physical_cap = step_size_cap(0.7, cfg.grid.h(), cfg.epsilon);
    const SolveTrajectory tr = run(cfg, plan, init);
    const auto en = tr.energies();
    const DissipationReport rep = dissipation_audit(en, tr.mesh, 0.7, tr.cap);
    CHECK(rep.ok());
    CHECK(rep.worst_margin < 0.0);
    CHECK(en.back().E < en.front().E);
    CHECK(en.back().E_alpha < en.front().E_alpha);

    std::ostringstream out;
    write_energy_csv_header(out);
    write_energy_csv_row(out, en.back(), 1.0, 0.1, 0.5, 3);
    CHECK(out.str().rfind("n,t_n,tau_n,E,E_alpha,G_term,dissipation_lhs,max_norm,fp_iters\n", 0) == 0);
}

TEST_CASE("flagged steps say which hypothesis failed") {
    std::vector<EnergyRecord> recs(3);
    recs[0].E_alpha = 1.0;
    recs[1].level = 1;
    recs[1].E_alpha = 0.9;
    recs[1].dissipation_increment = -0.1;
    recs[2].level = 2;
    recs[2].E_alpha = 1.2;
    recs[2].dissipation_increment = 0.3;
    const std::vector<double> steps{0.1, 0.02};
    const TimeMesh mesh = TimeMesh::from_steps(steps);
    const DissipationReport rep = dissipation_audit(recs, mesh, 0.5, 0.05);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].level == 2);
    CHECK_FALSE(rep.violations[0].step_over_cap);
    CHECK(rep.violations[0].ratio_below_rstar);
    CHECK(rep.non_monotone == std::vector<int>{2});
    CHECK(rep.worst_level == 2);
}
