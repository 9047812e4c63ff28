#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "tighthc/connector.hpp"
#include "tighthc/verify.hpp"

using namespace tighthc;

namespace {

std::vector<Vertex> range_vec(Vertex lo, Vertex hi) {
    std::vector<Vertex> v;
    for (Vertex x = lo; x < hi; ++x) v.push_back(x);
    return v;
}

// Brute-force goodness: re-evaluates (i)-(iv) over every fragment without
// sharing code with the primary implementation.
bool brute_good(Vertex b, const std::vector<Vertex>& path_of_a, const Tup& a,
                const std::vector<std::vector<Vertex>>& bases,
                const std::vector<std::vector<Vertex>>& truncated_paths,
                const std::vector<std::vector<Vertex>>& danger_sets,
                const std::vector<Vertex>& S, const Params& pa) {
    int r = pa.r;
    if (std::find(path_of_a.begin(), path_of_a.end(), b) != path_of_a.end()) return false;
    int m = a.size();
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<Vertex> frag;
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) frag.push_back(a[i]);
        int k = static_cast<int>(frag.size());
        frag.push_back(b);
        if (k <= r - 2) {
            int deg = oracle_exposure_degree(bases, frag, S);
            if (deg > pa.degE_threshold(k, static_cast<double>(S.size()))) return false;
        }
        if (oracle_mult(truncated_paths, frag) > pa.mult_threshold(k, static_cast<double>(S.size())))
            return false;
        if (k <= r - 3) {
            int deg = oracle_exposure_degree(danger_sets, frag, S);
            if (deg > pa.degD_threshold(k, static_cast<double>(S.size()))) return false;
        } else if (k == r - 2) {
            std::vector<Vertex> fs = frag;
            std::sort(fs.begin(), fs.end());
            for (auto d : danger_sets) {
                std::sort(d.begin(), d.end());
                if (d == fs) return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("is_good trivial cases") {
    Params pa = Params::make(Profile::Desk, 3, 500, 0.3);
    ExposureOracle oracle(40, 3, 0.3, 1);
    Fan fan(40, 3, Tup{0, 1}, FanKind::Tight);
    DangerHypergraph D(40, 3);
    std::vector<Vertex> S = range_vec(2, 30);
    CHECK(is_good(5, Tup{0, 1}, fan, oracle.exposure_graph(), D, S, pa));
    CHECK_FALSE(is_good(0, Tup{0, 1}, fan, oracle.exposure_graph(), D, S, pa));  // on the path
    CHECK_THROWS_AS(is_good(5, Tup{7, 8}, fan, oracle.exposure_graph(), D, S, pa),
                    std::invalid_argument);
}

TEST_CASE("is_good agrees with brute-force evaluation of (i)-(iv)") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 24;
        Params pa = Params::make(Profile::Desk, 3, 800, 0.25);
        pa.mult_floor = 1;   // tighten so conditions actually fire
        pa.degE_floor = 1;
        ExposureOracle oracle(n, 3, 0.25, 1000 + trial);
        // random exposure edges via empty-candidate exposures
        std::vector<std::vector<Vertex>> bases;
        for (int i = 0; i < 10; ++i) {
            Vertex x = static_cast<Vertex>(rng() % n), y;
            do { y = static_cast<Vertex>(rng() % n); } while (y == x);
            if (!oracle.exposure_graph().contains(set_key(Tup{x, y}))) {
                oracle.expose(Tup{x, y}, {});
                bases.push_back({x, y});
            }
        }
        // random small fan
        Fan fan(n, 3, Tup{0, 1}, FanKind::Tight);
        std::vector<int> frontier{0};
        std::vector<int> all_nodes{0};
        for (int step = 0; step < 3; ++step) {
            std::vector<int> next;
            for (int id : frontier) {
                int kids = 1 + static_cast<int>(rng() % 2);
                for (int k = 0; k < kids; ++k) {
                    Vertex v = static_cast<Vertex>(2 + rng() % (n - 2));
                    if (fan.on_path(id, v)) continue;
                    int nd = fan.extend(id, v, 0);
                    next.push_back(nd);
                    all_nodes.push_back(nd);
                }
            }
            if (next.empty()) break;
            frontier = next;
            fan.set_frontier(frontier);
        }
        // random danger sets
        DangerHypergraph D(n, 3);
        std::vector<std::vector<Vertex>> danger_sets;
        for (int i = 0; i < 5; ++i) {
            Vertex x = static_cast<Vertex>(rng() % n), y;
            do { y = static_cast<Vertex>(rng() % n); } while (y == x);
            D.insert(set_key(std::vector<Vertex>{x, y}));
            danger_sets.push_back({x, y});
        }
        std::vector<Vertex> S = range_vec(2, n);

        // truncated sequences of the fan: every prefix of every path
        std::vector<std::vector<Vertex>> truncated;
        for (int id : all_nodes) {
            auto seq = fan.path_sequence(id);
            truncated.push_back(seq);
        }
        std::sort(truncated.begin(), truncated.end());
        truncated.erase(std::unique(truncated.begin(), truncated.end()), truncated.end());

        int node = fan.frontier()[rng() % fan.frontier().size()];
        Tup a = fan.node(node).ext_base;
        auto path_of_a = fan.path_sequence(node);
        for (Vertex b = 2; b < n; ++b) {
            bool got = is_good(b, a, fan, oracle.exposure_graph(), D, S, pa);
            bool want = brute_good(b, path_of_a, a, bases, truncated, danger_sets, S, pa);
            INFO("trial " << trial << " b=" << b);
            CHECK(got == want);
        }
    }
}

TEST_CASE("is_blocked examples and differential") {
    ExposureHypergraph E(10, 3);
    CHECK_FALSE(is_blocked(Tup{0, 1}, Tup{2, 3}, E));
    // concatenation (0,1,3,2): windows {0,1,3},{1,3,2}
    E.insert(Tup{1, 3});
    CHECK(is_blocked(Tup{0, 1}, Tup{2, 3}, E));
    ExposureHypergraph E2(10, 3);
    E2.insert(Tup{0, 2});  // inside w+x but in no window
    CHECK_FALSE(is_blocked(Tup{0, 1}, Tup{2, 3}, E2));
    CHECK_THROWS_AS(is_blocked(Tup{0, 1}, Tup{1, 2}, E), std::invalid_argument);

    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 12;
        int r = 3 + static_cast<int>(rng() % 2);
        ExposureHypergraph E3(n, r);
        std::vector<std::vector<Vertex>> bases;
        for (int i = 0; i < 12; ++i) {
            std::set<Vertex> s;
            while (static_cast<int>(s.size()) < r - 1) s.insert(static_cast<Vertex>(rng() % n));
            std::vector<Vertex> b(s.begin(), s.end());
            if (E3.insert(Tup(b))) bases.push_back(b);
        }
        std::vector<Vertex> perm(static_cast<size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Tup w, x;
        for (int i = 0; i < r - 1; ++i) w.push(perm[static_cast<size_t>(i)]);
        for (int i = 0; i < r - 1; ++i) x.push(perm[static_cast<size_t>(r - 1 + i)]);
        CHECK(is_blocked(w, x, E3) == oracle_is_blocked(w.to_vector(), x.to_vector(), bases));
    }
}

TEST_CASE("danger_set basics") {
    Params pa = Params::make(Profile::Desk, 3, 500, 0.3);
    ExposureHypergraph E(30, 3);
    std::vector<Tup> leaves{Tup{0, 1}, Tup{2, 3}};
    auto D = danger_set(leaves, range_vec(10, 20), E, pa, 30);
    CHECK(D.edge_count() == 0);  // E empty -> nothing blocked

    // single leaf, threshold above 1 -> D stays empty regardless of E
    Params hi = pa;
    hi.Q = 100;  // threshold = 25
    ExposureHypergraph E2(30, 3);
    E2.insert(Tup{10, 11});
    E2.insert(Tup{0, 10});
    auto D2 = danger_set({Tup{0, 1}}, range_vec(10, 20), E2, hi, 30);
    CHECK(D2.edge_count() == 0);
}

TEST_CASE("danger_set equals the brute-force double loop") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 18;
        Params pa = Params::make(Profile::Desk, 3, 500, 0.3);
        pa.Q = 4 + static_cast<int>(rng() % 6);
        pa.desk_xi_prime = 0.3;  // threshold = 0.3 Q, small enough to trip
        ExposureHypergraph E(n, 3);
        std::vector<std::vector<Vertex>> bases;
        for (int i = 0; i < 10; ++i) {
            Vertex x = static_cast<Vertex>(rng() % n), y;
            do { y = static_cast<Vertex>(rng() % n); } while (y == x);
            if (E.insert(Tup{x, y})) bases.push_back({x, y});
        }
        std::vector<Tup> leaves;
        std::set<SetKey> leaf_keys;
        while (static_cast<int>(leaves.size()) < pa.Q) {
            Vertex x = static_cast<Vertex>(rng() % 9), y;
            do { y = static_cast<Vertex>(rng() % 9); } while (y == x);
            Tup l{x, y};
            if (leaf_keys.insert(set_key(l)).second) leaves.push_back(l);
        }
        std::vector<Vertex> Sp = range_vec(9, 18);

        auto D = danger_set(leaves, Sp, E, pa, n);

        // brute force over all ordered tuples x in Sp^2
        std::set<SetKey> expect;
        double threshold = pa.danger_threshold();
        for (Vertex x1 : Sp)
            for (Vertex x2 : Sp) {
                if (x1 == x2) continue;
                int cnt = 0;
                for (const Tup& w : leaves)
                    if (oracle_is_blocked(w.to_vector(), {x1, x2}, bases)) ++cnt;
                if (static_cast<double>(cnt) >= threshold)
                    expect.insert(set_key(std::vector<Vertex>{x1, x2}));
            }
        std::set<SetKey> got(D.edges().begin(), D.edges().end());
        INFO("trial " << trial << " Q=" << pa.Q);
        CHECK(got == expect);
    }
}

TEST_CASE("build_fan at p=1 reaches Q leaves with part discipline") {
    Params pa = Params::make(Profile::Desk, 3, 300, 1.0);
    ExposureOracle oracle(60, 3, 1.0, 5);
    DangerHypergraph D(60, 3);
    std::vector<std::vector<Vertex>> parts;
    for (int i = 0; i < 4; ++i) parts.push_back(range_vec(2 + 12 * i, 2 + 12 * (i + 1)));
    int Q = 20, t = 4;
    auto fan = Connector::build_fan(Tup{0, 1}, parts, D, oracle, pa, Q, t);
    REQUIRE(fan.ok());
    CHECK(fan->frontier_size() >= Q);
    for (int id : fan->frontier()) {
        CHECK(fan->node(id).depth == t);
        // part discipline: i-th extension vertex from parts[(i-1) mod 4]
        int node = id;
        while (node != 0) {
            const auto& nd = fan->node(node);
            CHECK(nd.part == (nd.depth - 1) % 4);
            node = nd.parent;
        }
        // leaf distinctness
        CHECK(fan->mult_key(set_key(fan->node(id).ext_base)) == 1);
    }
}

TEST_CASE("fan health on fresh and adversarial fans") {
    Params pa = Params::make(Profile::Desk, 3, 300, 0.5);
    ExposureOracle oracle(40, 3, 0.5, 2);
    DangerHypergraph D(40, 3);
    Fan fresh(40, 3, Tup{0, 1}, FanKind::Tight);
    auto rep = check_fan_health(fresh, oracle.exposure_graph(), D, range_vec(2, 40), pa, -1);
    CHECK(rep.p2);
    CHECK(rep.p3);
    CHECK(rep.p4);
    CHECK(rep.p5);
    CHECK(rep.p4_leaf_violations == 0);

    // duplicate leaf: two branches ending on the same vertex pair
    Fan dup(40, 3, Tup{0, 1}, FanKind::Tight);
    int n1 = dup.extend(0, 5, 0);
    int n2 = dup.extend(n1, 6, 0);
    int m1 = dup.extend(0, 6, 0);
    int m2 = dup.extend(m1, 5, 0);
    dup.set_frontier({n2, m2});
    auto rep2 = check_fan_health(dup, oracle.exposure_graph(), D, range_vec(2, 40), pa, 1);
    CHECK(rep2.p4_leaf_violations > 0);
    CHECK_FALSE(rep2.p4);
}

TEST_CASE("connect at p=1 returns a validating path with exact ends") {
    const int n = 80;
    Params pa = Params::make(Profile::Desk, 3, n, 1.0);
    ExposureOracle oracle(n, 3, 1.0, 9);
    ConnectRequest req;
    req.u = Tup{0, 1};
    req.v = Tup{2, 3};
    req.S = range_vec(4, 68);
    req.oracle = &oracle;
    req.params = &pa;
    req.Q_override = 8;
    auto res = Connector::connect(req);
    REQUIRE(res.ok());
    const auto& path = res->path;
    CHECK(validate_tight_seq(path, 3, [&](SetKey k) { return oracle.is_present(k); }));
    CHECK(path[0] == 0);
    CHECK(path[1] == 1);
    CHECK(path[path.size() - 2] == 2);
    CHECK(path.back() == 3);
    for (size_t i = 2; i + 2 < path.size(); ++i) {
        CHECK(path[i] >= 4);
        CHECK(path[i] < 68);
    }
    CHECK(res->stats.e_edges_added > 0);
}

TEST_CASE("connect contract violations are invalid-argument") {
    const int n = 40;
    Params pa = Params::make(Profile::Desk, 3, n, 1.0);
    ExposureOracle oracle(n, 3, 1.0, 9);
    ConnectRequest req;
    req.u = Tup{0, 1};
    req.v = Tup{2, 3};
    req.oracle = &oracle;
    req.params = &pa;
    req.S = range_vec(4, 12);  // 8 < 16 vertices
    CHECK_THROWS_AS(Connector::connect(req), std::invalid_argument);
    req.S = range_vec(2, 30);  // intersects v
    CHECK_THROWS_AS(Connector::connect(req), std::invalid_argument);
    req.S = range_vec(4, 30);
    req.v = Tup{1, 3};  // overlaps u
    CHECK_THROWS_AS(Connector::connect(req), std::invalid_argument);
}

TEST_CASE("connect precondition: no exposure edge may touch S and an end") {
    const int n = 40;
    Params pa = Params::make(Profile::Desk, 3, n, 1.0);
    ExposureOracle oracle(n, 3, 1.0, 9);
    oracle.expose(Tup{0, 10}, {});  // base intersecting u and S
    ConnectRequest req;
    req.u = Tup{0, 1};
    req.v = Tup{2, 3};
    req.S = range_vec(4, 36);
    req.oracle = &oracle;
    req.params = &pa;
    CHECK_THROWS_AS(Connector::connect(req), std::invalid_argument);
}

TEST_CASE("blocked candidates are excluded before exposure") {
    const int n = 90;
    Params pa = Params::make(Profile::Desk, 3, n, 1.0);
    ExposureOracle oracle(n, 3, 1.0, 14);
    // make every pair with partner vertex z unsafe: bases {z, s} over the
    // u-side pool would block; simpler: bases {z, v} for all v in the v-side
    // pool make z-freshness fail for v-side ends... instead pre-record a
    // base inside the v pool and check the stats counter moves.
    ConnectRequest req;
    req.u = Tup{0, 1};
    req.v = Tup{2, 3};
    req.S = range_vec(4, 84);
    req.oracle = &oracle;
    req.params = &pa;
    req.Q_override = 6;
    // pre-expose bases {w, z} pairs inside the u-half pool so some leaf ends
    // carry exposure edges with candidate partners
    for (Vertex z = 44; z < 64; ++z) oracle.expose(Tup{43, z}, {});
    auto res = Connector::connect(req);
    REQUIRE(res.ok());
    CHECK(validate_tight_seq(res->path, 3, [&](SetKey k) { return oracle.is_present(k); }));
}

TEST_CASE("spike_connect at p=1: even length, exact end spikes, validates") {
    const int n = 80;
    Params pa = Params::make(Profile::Desk, 3, n, 1.0);
    ExposureOracle oracle(n, 3, 1.0, 11);
    ConnectRequest req;
    req.u = Tup{0, 1};
    req.v = Tup{2, 3};
    req.S = range_vec(4, 68);
    req.oracle = &oracle;
    req.params = &pa;
    req.Q_override = 8;
    auto res = Connector::spike_connect(req);
    REQUIRE(res.ok());
    const SpikePath& sp = res->path;
    CHECK(sp.length() % 2 == 0);
    CHECK(sp.spikes.front() == Tup{0, 1});
    CHECK(sp.spikes.back() == Tup{2, 3});
    CHECK(validate_spike_seq(sp, 3, [&](SetKey k) { return oracle.is_present(k); }));
}

TEST_CASE("connect r=4 at p=1 uses one-edge extensions and validates") {
    const int n = 120;
    Params pa = Params::make(Profile::Desk, 4, n, 1.0);
    ExposureOracle oracle(n, 4, 1.0, 13);
    ConnectRequest req;
    req.u = Tup{0, 1, 2};
    req.v = Tup{3, 4, 5};
    req.S = range_vec(6, 102);  // 96 = 4 * 24 parts
    req.oracle = &oracle;
    req.params = &pa;
    req.Q_override = 6;
    auto res = Connector::connect(req);
    REQUIRE(res.ok());
    CHECK(validate_tight_seq(res->path, 4, [&](SetKey k) { return oracle.is_present(k); }));
    CHECK(res->path[0] == 0);
    CHECK(res->path.back() == 5);
}

TEST_CASE("connect under desk randomness keeps its contracts") {
    // small Monte-Carlo; the acceptance suite runs the calibrated version
    int successes = 0;
    for (int seed = 0; seed < 20; ++seed) {
        const int n = 400;
        const double p = 0.2;
        Params pa = Params::make(Profile::Desk, 3, n, p);
        ExposureOracle oracle(n, 3, p, 100 + seed);
        ConnectRequest req;
        req.u = Tup{0, 1};
        req.v = Tup{2, 3};
        req.S = range_vec(4, 164);
        req.oracle = &oracle;
        req.params = &pa;
        auto res = Connector::connect(req);
        if (!res.ok()) continue;
        ++successes;
        CHECK(validate_tight_seq(res->path, 3, [&](SetKey k) { return oracle.is_present(k); }));
        int interior = static_cast<int>(res->path.size()) - 4;
        CHECK(interior <= 2 * pa.t_cap + 2 * 3);
        CHECK(res->stats.e_growth_ratio <= pa.growth_cap_K);
    }
    CHECK(successes >= 17);
}
