#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "tighthc/hypergraph.hpp"
#include "tighthc/verify.hpp"

using namespace tighthc;

namespace {
// independent edge counter for the complete graph
long long binom_by_enumeration(int n, int r) {
    long long c = 0;
    detail::for_each_combination(n, r, [&](const std::vector<Vertex>&) { ++c; });
    return c;
}
}  // namespace

TEST_CASE("make_complete edge counts") {
    CHECK(make_complete(4, 3).edge_count() == 4);
    CHECK(make_complete(3, 3).edge_count() == 1);
    CHECK(make_complete(6, 3).edge_count() == static_cast<size_t>(binom_by_enumeration(6, 3)));
    CHECK(make_complete(9, 4).edge_count() == static_cast<size_t>(binom_by_enumeration(9, 4)));
    CHECK_THROWS_AS(make_complete(2, 3), std::invalid_argument);
}

TEST_CASE("degree basics") {
    auto k6 = make_complete(6, 3);
    std::vector<Vertex> all{0, 1, 2, 3, 4, 5};
    CHECK(k6.degree({0}, all) == 10);
    CHECK(k6.degree({0}, {}) == 0);

    DenseHypergraph g(4, 3);
    g.add_edge({0, 1, 2});
    CHECK(g.degree({0, 1}, {2}) == 1);
    CHECK(g.degree({0, 1}, {3}) == 0);
    CHECK_THROWS_AS(g.degree({}, all), std::invalid_argument);
    CHECK_THROWS_AS(g.degree({0, 1, 2}, all), std::invalid_argument);
}

TEST_CASE("has_edge is invariant under permutation of the query") {
    std::mt19937_64 rng(7);
    DenseHypergraph g(10, 3);
    for (int i = 0; i < 40; ++i) {
        std::vector<Vertex> e;
        while (e.size() < 3) {
            Vertex v = static_cast<Vertex>(rng() % 10);
            if (std::find(e.begin(), e.end(), v) == e.end()) e.push_back(v);
        }
        g.add_edge(e);
    }
    for (SetKey k : g.edges()) {
        auto e = key_vertices(k);
        std::sort(e.begin(), e.end());
        do {
            CHECK(g.has_edge(e));
        } while (std::next_permutation(e.begin(), e.end()));
    }
}

TEST_CASE("degree agrees with the enumeration oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 5 + static_cast<int>(rng() % 8);  // <= 12
        int r = 3 + static_cast<int>(rng() % 2);
        if (r > n) r = n;
        DenseHypergraph g(n, r);
        detail::for_each_combination(n, r, [&](const std::vector<Vertex>& c) {
            if (rng() % 3 == 0) g.add_edge(c);
        });
        std::vector<Vertex> f;
        int fs = 1 + static_cast<int>(rng() % (r - 1));
        while (static_cast<int>(f.size()) < fs) {
            Vertex v = static_cast<Vertex>(rng() % n);
            if (std::find(f.begin(), f.end(), v) == f.end()) f.push_back(v);
        }
        std::vector<Vertex> S;
        for (Vertex v = 0; v < n; ++v)
            if (rng() % 2 == 0 && std::find(f.begin(), f.end(), v) == f.end()) S.push_back(v);
        CHECK(g.degree(f, S) == oracle_degree(g, f, S));
    }
}

TEST_CASE("edge list round trip and errors") {
    auto g = from_edge_list("0 1 2\n1 2 3\n", 4, 3);
    CHECK(g.edge_count() == 2);
    CHECK(from_edge_list("0 1 2\n0 2 1\n", 4, 3).edge_count() == 1);
    CHECK_THROWS_WITH(from_edge_list("0 1\n", 4, 3), Catch::Matchers::ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(from_edge_list("0 1 2\n0 9 1\n", 4, 3),
                      Catch::Matchers::ContainsSubstring("line 2"));

    SECTION("optional header line") {
        auto h = from_edge_list("5 3\n0 1 2\n2 3 4\n", 0, 0);
        CHECK(h.vertex_count() == 5);
        CHECK(h.uniformity() == 3);
        CHECK(h.edge_count() == 2);
    }
    SECTION("round trip") {
        auto text = to_edge_list(g);
        auto g2 = from_edge_list(text, 0, 0);
        CHECK(g2.edge_count() == g.edge_count());
        for (SetKey k : g.edges()) CHECK(g2.has_edge_key(k));
    }
}
