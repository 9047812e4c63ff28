#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "tighthc/common.hpp"

namespace tighthc {

// Explicit r-uniform hypergraph. Edges are stored as canonically sorted
// r-sets; immutable once built, so instances can be shared across threads.
class DenseHypergraph {
public:
    DenseHypergraph(int n, int r) : n_(n), r_(r) {
        if (r < 2 || r > kMaxUniformity) throw std::invalid_argument("uniformity out of range");
        if (n < 0 || n >= kMaxVertexCount) throw std::invalid_argument("vertex count out of range");
    }

    int vertex_count() const { return n_; }
    int uniformity() const { return r_; }
    size_t edge_count() const { return edges_.size(); }
    const std::vector<SetKey>& edges() const { return edges_; }

    void add_edge(const std::vector<Vertex>& e) {
        if (static_cast<int>(e.size()) != r_) throw std::invalid_argument("edge arity mismatch");
        for (Vertex v : e) check_vertex(v);
        std::vector<Vertex> s = e;
        std::sort(s.begin(), s.end());
        for (size_t i = 1; i < s.size(); ++i)
            if (s[i] == s[i - 1]) throw std::invalid_argument("edge has repeated vertex");
        SetKey k = set_key(s);
        if (edge_set_.insert(k).second) edges_.push_back(k);
    }

    bool has_edge_key(SetKey k) const { return edge_set_.count(k) != 0; }

    bool has_edge(const std::vector<Vertex>& e) const {
        if (static_cast<int>(e.size()) != r_) throw std::invalid_argument("edge arity mismatch");
        return has_edge_key(set_key(e));
    }
    bool has_edge(const Tup& t) const {
        if (t.size() != r_) throw std::invalid_argument("edge arity mismatch");
        return has_edge_key(set_key(t));
    }

    // deg(f, S): edges e with f <= e and e \ f <= S.
    int degree(const std::vector<Vertex>& f, const std::vector<Vertex>& S) const {
        if (f.empty() || static_cast<int>(f.size()) > r_ - 1)
            throw std::invalid_argument("degree: |f| must be in [1, r-1]");
        VertexBitmap fb(n_), sb(n_);
        for (Vertex v : f) { check_vertex(v); fb.set(v); }
        for (Vertex v : S) { check_vertex(v); sb.set(v); }
        int count = 0;
        for (SetKey k : edges_) {
            auto vs = key_vertices(k);
            int hit = 0;
            bool ok = true;
            for (Vertex v : vs) {
                if (fb.test(v)) ++hit;
                else if (!sb.test(v)) { ok = false; break; }
            }
            if (ok && hit == static_cast<int>(f.size())) ++count;
        }
        return count;
    }

private:
    void check_vertex(Vertex v) const {
        if (v < 0 || v >= n_) throw std::invalid_argument("vertex id out of range");
    }

    int n_;
    int r_;
    std::vector<SetKey> edges_;
    std::unordered_set<SetKey, SetKeyHash> edge_set_;
};

namespace detail {
template <typename F>
inline void for_each_combination(int n, int k, F&& fn) {
    std::vector<Vertex> c(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) c[static_cast<size_t>(i)] = i;
    if (k > n) return;
    while (true) {
        fn(c);
        int i = k - 1;
        while (i >= 0 && c[static_cast<size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++c[static_cast<size_t>(i)];
        for (int j = i + 1; j < k; ++j) c[static_cast<size_t>(j)] = c[static_cast<size_t>(j - 1)] + 1;
    }
}
}  // namespace detail

inline DenseHypergraph make_complete(int n, int r) {
    if (r > n) throw std::invalid_argument("make_complete: r > n");
    DenseHypergraph g(n, r);
    detail::for_each_combination(n, r, [&](const std::vector<Vertex>& c) { g.add_edge(c); });
    return g;
}

// Edge-list text: one edge per line, r space-separated ids. An optional
// first line with exactly two tokens is read as "n r".
inline DenseHypergraph from_edge_list(const std::string& text, int n, int r) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    std::optional<DenseHypergraph> g;
    auto parse_error = [&](const std::string& msg) {
        throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<long long> tok;
        long long x;
        while (ls >> x) tok.push_back(x);
        if (!ls.eof()) parse_error("malformed token");
        if (tok.empty()) continue;
        if (lineno == 1 && tok.size() == 2 && !saw_header) {
            n = static_cast<int>(tok[0]);
            r = static_cast<int>(tok[1]);
            saw_header = true;
            continue;
        }
        if (!g) g.emplace(n, r);
        if (static_cast<int>(tok.size()) != r) parse_error("expected " + std::to_string(r) + " vertex ids");
        std::vector<Vertex> e;
        for (long long t : tok) {
            if (t < 0 || t >= n) parse_error("vertex id out of range");
            e.push_back(static_cast<Vertex>(t));
        }
        try {
            g->add_edge(e);
        } catch (const std::invalid_argument& ex) {
            parse_error(ex.what());
        }
    }
    if (!g) g.emplace(n, r);
    return *g;
}

inline std::string to_edge_list(const DenseHypergraph& g, bool header = true) {
    std::ostringstream out;
    if (header) out << g.vertex_count() << ' ' << g.uniformity() << '\n';
    std::vector<std::vector<Vertex>> es;
    es.reserve(g.edge_count());
    for (SetKey k : g.edges()) es.push_back(key_vertices(k));
    std::sort(es.begin(), es.end());
    for (const auto& e : es) {
        for (size_t i = 0; i < e.size(); ++i) out << (i ? " " : "") << e[i];
        out << '\n';
    }
    return out.str();
}

}  // namespace tighthc
