#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tighthc/params.hpp"

using namespace tighthc;

TEST_CASE("paper profile reproduces the published constants") {
    for (int r : {3, 4, 5}) {
        Params pa = Params::make(Profile::Paper, r, 100000, 0.01);
        CHECK(pa.paper_constants_consistent());
    }
    Params p3 = Params::make(Profile::Paper, 3, 100000, 0.01);
    CHECK(p3.xi_prime == Catch::Approx(1e-6));
    CHECK(p3.log_C == Catch::Approx(24.0 * std::log(10.0)));
    CHECK(p3.xi == Catch::Approx(std::pow(1e-6, 3) / (6.0 * std::pow(2.0, 60))));
    CHECK(p3.delta == Catch::Approx(std::pow(8.0, 3) * p3.xi + p3.xi_prime));
}

TEST_CASE("Q and t rules") {
    // r=3, p=0.01, ln n = 7 -> Q = 700
    CHECK(Params::q_rule(3, 0.01, 7.0, 1 << 20) == 700);
    // t = 2 * ceil(ln 700 / ln 7) = 8
    CHECK(Params::t_rule_paper(700, 7.0) == 8);

    Params pa = Params::make(Profile::Desk, 3, 1097, 0.01);  // ln n ~ 7.0003
    CHECK(pa.Q == 701);  // ceil picks up the fraction

    // Q cap applies
    CHECK(Params::q_rule(4, 1e-4, 10.0, 5000) == 5000);

    // t is even in both profiles
    for (int n : {100, 1000, 10000}) {
        Params paper = Params::make(Profile::Paper, 3, n, 0.05);
        CHECK(paper.t % 2 == 0);
        Params desk = Params::make(Profile::Desk, 3, n, 0.05);
        CHECK(desk.t_rule_desk(desk.Q, 40) % 2 == 0);
    }
}

TEST_CASE("desk thresholds have sane shapes") {
    Params pa = Params::make(Profile::Desk, 3, 2000, 0.05);
    // k = r-2 keeps windows unique
    CHECK(pa.mult_threshold(1, 600.0) == 0.0);
    // k = 0 allows bounded reuse
    CHECK(pa.mult_threshold(0, 600.0) >= 2.0);
    CHECK(pa.degE_threshold(1, 600.0) >= 4.0);
    CHECK(pa.degE_threshold(0, 600.0) >= 100.0);
    CHECK(pa.danger_threshold() >= 1.0);

    Params paper = Params::make(Profile::Paper, 3, 2000, 0.05);
    // the paper thresholds at desk sizes collapse to ~0 (that is why the
    // desk profile exists)
    CHECK(paper.mult_threshold(0, 600.0) < 1.0);
}

TEST_CASE("overrides") {
    Params pa = Params::make(Profile::Desk, 3, 1000, 0.2);
    pa.apply_override("grow", 12);
    CHECK(pa.grow == 12);
    pa.apply_override("sfrac", 0.3);
    CHECK(pa.s_frac == Catch::Approx(0.3));
    CHECK_THROWS_AS(pa.apply_override("nonsense", 1.0), std::invalid_argument);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(Params::make(Profile::Desk, 2, 100, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(Params::make(Profile::Desk, 3, 2, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(Params::make(Profile::Desk, 3, 100, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Params::make(Profile::Desk, 3, 100, 1.5), std::invalid_argument);
}
