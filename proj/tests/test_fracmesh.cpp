#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "fracstep/fracmesh.hpp"
#include "fracstep/l21sigma.hpp"

using namespace fracstep;

TEST_CASE("graded mesh nodes and ratios") {
    const TimeMesh uni = build_graded_mesh(1.0, 4, 1.0);
    REQUIRE(uni.steps() == 4);
    for (int k = 0; k <= 4; ++k) CHECK(uni.node(k) == doctest::Approx(0.25 * k).epsilon(1e-15));
    for (int k = 2; k <= 4; ++k) CHECK(uni.ratio(k) == doctest::Approx(1.0).epsilon(1e-14));

    const TimeMesh sq = build_graded_mesh(1.0, 4, 2.0);
    const double expect[] = {0.0, 1.0 / 16, 4.0 / 16, 9.0 / 16, 1.0};
    for (int k = 0; k <= 4; ++k) CHECK(sq.node(k) == doctest::Approx(expect[k]).epsilon(1e-15));
    CHECK(sq.ratio(2) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(sq.ratio(3) == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
    CHECK(sq.ratio(4) == doctest::Approx(7.0 / 5.0).epsilon(1e-14));

    const TimeMesh warm = build_graded_mesh(0.01, 30, 3.0);
    CHECK(warm.final_time() == 0.01);
    CHECK(warm.ratio(2) == doctest::Approx(7.0).epsilon(1e-12));
    const ConstraintReport rep = check_ratio_constraint(warm, rstar(0.5));
    CHECK(rep.ok());
    CHECK(rep.min_ratio > 1.0);
}

TEST_CASE("bad meshes are rejected") {
    CHECK_THROWS_AS(build_graded_mesh(1.0, 0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(build_graded_mesh(-1.0, 4, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(TimeMesh::from_nodes({0.0, 0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(TimeMesh::from_nodes({0.1, 0.5}), std::invalid_argument);
    const std::vector<double> neg{0.1, -0.1};
    CHECK_THROWS_AS(TimeMesh::from_steps(neg), std::invalid_argument);
}

TEST_CASE("two-phase layout") {
    const TwoPhaseLayout pure = two_phase_layout(1.0, 1.0, 10);
    CHECK(pure.T0 == 1.0);
    CHECK(pure.N0 == 10);
    CHECK(pure.N1 == 0);
    const TimeMesh m = build_two_phase_mesh(1.0, 1.0, 10, 3);
    CHECK(m.steps() == 10);
    for (int k = 1; k <= 10; ++k) CHECK(m.tau(k) == doctest::Approx(0.1).epsilon(1e-13));

    // N0 = ceil(40 / 1.5) = 27 graded steps on [0, 0.5]
    const TwoPhaseLayout l = two_phase_layout(1.0, 2.0, 40);
    CHECK(l.T0 == 0.5);
    CHECK(l.N0 == 27);
    CHECK(l.N1 == 13);
    const TimeMesh mesh = build_two_phase_mesh(1.0, 2.0, 40, 7);
    REQUIRE(mesh.steps() == 40);
    CHECK(std::abs(mesh.final_time() - 1.0) <= 1e-15);
    CHECK(mesh.node(27) == doctest::Approx(0.5).epsilon(1e-15));
    double random_sum = 0.0;
    for (int k = 28; k <= 40; ++k) random_sum += mesh.tau(k);
    CHECK(random_sum == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("two-phase mesh is deterministic per seed") {
    const TimeMesh a = build_two_phase_mesh(1.0, 2.5, 80, 11);
    const TimeMesh b = build_two_phase_mesh(1.0, 2.5, 80, 11);
    const TimeMesh c = build_two_phase_mesh(1.0, 2.5, 80, 12);
    const int N0 = two_phase_layout(1.0, 2.5, 80).N0;
    bool suffix_differs = false;
    for (int k = 0; k <= 80; ++k) {
        CHECK(a.node(k) == b.node(k));
        if (k <= N0) CHECK(a.node(k) == c.node(k));
        else if (a.node(k) != c.node(k)) suffix_differs = true;
    }
    CHECK(suffix_differs);
}

TEST_CASE("ratio constraint report") {
    const std::vector<double> uni(8, 0.125);
    CHECK(check_ratio_constraint(TimeMesh::from_steps(uni), 0.4037).ok());

    const std::vector<double> steps{1.0, 0.3};
    const TimeMesh m = TimeMesh::from_steps(steps);
    const ConstraintReport rep = check_ratio_constraint(m, 0.3865);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].k == 2);
    CHECK(rep.violations[0].ratio == doctest::Approx(0.3));
    CHECK_THROWS_AS(check_ratio_constraint(m, 0.3865, true), std::domain_error);
}

TEST_CASE("adaptive controller") {
    AdaptiveConfig cfg;
    cfg.r_star = 0.4037;
    CHECK(adaptive_next_step(0.05, 0.0, cfg).tau == doctest::Approx(0.1));

    // Pi = sqrt(1 + 1e3 * 100) = 316.23, tau_max / Pi = 3.162e-4 < tau_min
    const AdaptiveStep low = adaptive_next_step(0.001, 10.0, cfg);
    CHECK(low.tau == doctest::Approx(1e-3).epsilon(1e-14));

    // ratio floor binds: 0.4037 * 0.05
    const AdaptiveStep floor = adaptive_next_step(0.05, 10.0, cfg);
    CHECK(floor.tau == doctest::Approx(0.020185).epsilon(1e-13));
    CHECK_FALSE(floor.cap_broke_ratio_floor);

    cfg.physical_cap = 0.01;
    const AdaptiveStep capped = adaptive_next_step(0.05, 10.0, cfg);
    CHECK(capped.tau == 0.01);
    CHECK(capped.cap_broke_ratio_floor);

    AdaptiveConfig bad;
    bad.tau_min = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("random admissible meshes respect the ratio bound") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const TimeMesh m = random_admissible_mesh(25, 0.39, 4.0, s);
        CHECK(m.steps() == 25);
        CHECK(check_ratio_constraint(m, 0.39).ok());
    }
}

TEST_CASE("mesh csv") {
    std::ostringstream out;
    write_mesh_csv(out, build_graded_mesh(1.0, 2, 1.0));
    const std::string s = out.str();
    CHECK(s.rfind("k,t_k,tau_k,r_k\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 4);
}

TEST_CASE("push_step grows a mesh") {
    TimeMesh m;
    m.push_step(0.1);
    m.push_step(0.2);
    CHECK(m.steps() == 2);
    CHECK(m.final_time() == doctest::Approx(0.3));
    CHECK(m.ratio(2) == doctest::Approx(2.0));
    CHECK_THROWS_AS(m.push_step(0.0), std::invalid_argument);
}
