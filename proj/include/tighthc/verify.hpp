#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "tighthc/common.hpp"
#include "tighthc/hypergraph.hpp"

// Ground-truth checking. The oracle_* functions are deliberately separate
// re-implementations by exhaustive enumeration; they must not call into the
// primary implementations they check.

namespace tighthc {

using CyclicOrder = std::vector<Vertex>;

// All n cyclic windows of r consecutive vertices are edges of g.
inline bool verify_tight_hamilton(const CyclicOrder& order, const DenseHypergraph& g) {
    const int n = g.vertex_count();
    const int r = g.uniformity();
    if (static_cast<int>(order.size()) != n)
        throw std::invalid_argument("verify: order must list all n vertices");
    std::vector<bool> seen(static_cast<size_t>(n), false);
    for (Vertex v : order) {
        if (v < 0 || v >= n || seen[static_cast<size_t>(v)])
            throw std::invalid_argument("verify: order is not a permutation");
        seen[static_cast<size_t>(v)] = true;
    }
    std::vector<Vertex> window(static_cast<size_t>(r));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < r; ++j)
            window[static_cast<size_t>(j)] = order[static_cast<size_t>((i + j) % n)];
        if (!g.has_edge_key(set_key(window))) return false;
    }
    return true;
}

// Exhaustive search for a tight Hamilton order; vertex 0 is fixed first and
// reflections are halved by requiring order[1] < order[n-1]. DFS prunes on
// every completed window. n is capped to keep this a test oracle.
inline std::optional<CyclicOrder> brute_force_hamilton(const DenseHypergraph& g) {
    const int n = g.vertex_count();
    const int r = g.uniformity();
    if (n > 12) throw std::invalid_argument("brute_force_hamilton: n capped at 12");
    if (n < r) return std::nullopt;
    std::vector<Vertex> order(static_cast<size_t>(n), -1);
    std::vector<bool> used(static_cast<size_t>(n), false);
    order[0] = 0;
    used[0] = true;
    std::vector<Vertex> window(static_cast<size_t>(r));

    auto window_ok = [&](int endpos) {
        // check the window of r consecutive order entries ending at endpos
        if (endpos < r - 1) return true;
        for (int j = 0; j < r; ++j)
            window[static_cast<size_t>(j)] = order[static_cast<size_t>(endpos - r + 1 + j)];
        return g.has_edge_key(set_key(window));
    };

    std::function<bool(int)> dfs = [&](int pos) -> bool {
        if (pos == n) {
            // wrap-around windows
            for (int i = n - r + 1; i < n; ++i) {
                for (int j = 0; j < r; ++j)
                    window[static_cast<size_t>(j)] = order[static_cast<size_t>((i + j) % n)];
                if (!g.has_edge_key(set_key(window))) return false;
            }
            return true;
        }
        for (Vertex v = 1; v < n; ++v) {
            if (used[static_cast<size_t>(v)]) continue;
            if (pos == n - 1 && order[1] > v) continue;  // reflection dedup
            order[static_cast<size_t>(pos)] = v;
            used[static_cast<size_t>(v)] = true;
            if (window_ok(pos) && dfs(pos + 1)) return true;
            used[static_cast<size_t>(v)] = false;
        }
        order[static_cast<size_t>(pos)] = -1;
        return false;
    };
    if (dfs(1)) {
        CyclicOrder out(order.begin(), order.end());
        return out;
    }
    return std::nullopt;
}

// --- independent brute-force twins -----------------------------------------

// deg(f, S) by enumerating all r-sets over [0, n).
inline int oracle_degree(const DenseHypergraph& g, const std::vector<Vertex>& f,
                         const std::vector<Vertex>& S) {
    const int n = g.vertex_count();
    const int r = g.uniformity();
    int count = 0;
    std::vector<Vertex> others;
    for (Vertex v : S)
        if (std::find(f.begin(), f.end(), v) == f.end()) others.push_back(v);
    int need = r - static_cast<int>(f.size());
    if (need < 0) return 0;
    detail::for_each_combination(static_cast<int>(others.size()), need,
                                 [&](const std::vector<Vertex>& idx) {
                                     std::vector<Vertex> e = f;
                                     for (Vertex i : idx) e.push_back(others[static_cast<size_t>(i)]);
                                     std::sort(e.begin(), e.end());
                                     if (g.has_edge(e)) ++count;
                                 });
    (void)n;
    return count;
}

// deg_E(f, S) over an explicit list of (r-1)-sets.
inline int oracle_exposure_degree(const std::vector<std::vector<Vertex>>& bases,
                                  const std::vector<Vertex>& f, const std::vector<Vertex>& S) {
    int count = 0;
    for (const auto& e : bases) {
        bool all = true;
        int infrag = 0;
        for (Vertex v : e) {
            if (std::find(f.begin(), f.end(), v) != f.end()) ++infrag;
            else if (std::find(S.begin(), S.end(), v) == S.end()) { all = false; break; }
        }
        if (all && infrag == static_cast<int>(f.size())) ++count;
    }
    return count;
}

// mult over an explicit list of truncated path sequences: count sequences in
// which `frag` occupies some |frag| consecutive positions, in any order.
inline int oracle_mult(const std::vector<std::vector<Vertex>>& truncated_paths,
                       const std::vector<Vertex>& frag) {
    int count = 0;
    std::vector<Vertex> sorted_frag = frag;
    std::sort(sorted_frag.begin(), sorted_frag.end());
    for (const auto& seq : truncated_paths) {
        bool found = false;
        for (size_t i = 0; i + frag.size() <= seq.size() && !found; ++i) {
            std::vector<Vertex> win(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                    seq.begin() + static_cast<std::ptrdiff_t>(i + frag.size()));
            std::sort(win.begin(), win.end());
            found = (win == sorted_frag);
        }
        if (found) ++count;
    }
    return count;
}

// blocked(w, x) by direct construction of the concatenation and scanning
// every window's (r-1)-subsets against the base list.
inline bool oracle_is_blocked(const std::vector<Vertex>& w, const std::vector<Vertex>& x,
                              const std::vector<std::vector<Vertex>>& bases) {
    std::vector<Vertex> seq = w;
    seq.insert(seq.end(), x.rbegin(), x.rend());
    int r = static_cast<int>(w.size()) + 1;
    std::vector<std::vector<Vertex>> sorted_bases;
    for (auto b : bases) {
        std::sort(b.begin(), b.end());
        sorted_bases.push_back(b);
    }
    for (size_t i = 0; i + static_cast<size_t>(r) <= seq.size(); ++i) {
        for (int drop = 0; drop < r; ++drop) {
            std::vector<Vertex> sub;
            for (int j = 0; j < r; ++j)
                if (j != drop) sub.push_back(seq[i + static_cast<size_t>(j)]);
            std::sort(sub.begin(), sub.end());
            for (const auto& b : sorted_bases)
                if (b == sub) return true;
        }
    }
    return false;
}

}  // namespace tighthc
