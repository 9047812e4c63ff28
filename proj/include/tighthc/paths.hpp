#pragma once

#include <algorithm>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tighthc/common.hpp"
#include "tighthc/hypergraph.hpp"

namespace tighthc {

// Ordered vertex sequence whose every r-window is an edge of the decided
// graph. Carries a membership index so "is v on P" is O(1).
class TightPath {
public:
    TightPath(int n, int r) : r_(r), member_(n) {}

    void append(Vertex v) {
        seq_.push_back(v);
        member_.set(v);
    }
    const std::vector<Vertex>& sequence() const { return seq_; }
    int size() const { return static_cast<int>(seq_.size()); }
    bool contains(Vertex v) const { return member_.test(v); }

    Tup start_tuple() const { return tuple_at(0); }
    Tup end_tuple() const { return tuple_at(size() - (r_ - 1)); }

    TightPath reversed() const {
        TightPath p(member_.size(), r_);
        for (auto it = seq_.rbegin(); it != seq_.rend(); ++it) p.append(*it);
        return p;
    }

private:
    Tup tuple_at(int from) const {
        Tup t;
        for (int i = 0; i < r_ - 1; ++i) t.push(seq_[static_cast<size_t>(from + i)]);
        return t;
    }
    int r_;
    std::vector<Vertex> seq_;
    VertexBitmap member_;
};

struct SpikePath {
    std::vector<Tup> spikes;  // pairwise disjoint (r-1)-tuples

    int length() const { return static_cast<int>(spikes.size()); }
};

inline std::vector<Vertex> reversed_seq(const std::vector<Vertex>& s) {
    return {s.rbegin(), s.rend()};
}

// All r-windows of `seq` are edges and the vertices are distinct.
template <typename HasEdge>
inline bool validate_tight_seq(const std::vector<Vertex>& seq, int r, HasEdge&& has_edge) {
    if (static_cast<int>(seq.size()) < r)
        throw std::invalid_argument("validate_tight: path shorter than r");
    std::unordered_set<Vertex> seen(seq.begin(), seq.end());
    if (seen.size() != seq.size()) return false;
    for (size_t i = 0; i + static_cast<size_t>(r) <= seq.size(); ++i) {
        SetKey k = set_key(seq.data() + i, r);
        if (!has_edge(k)) return false;
    }
    return true;
}

inline bool validate_tight(const std::vector<Vertex>& seq, const DenseHypergraph& g) {
    return validate_tight_seq(seq, g.uniformity(), [&](SetKey k) { return g.has_edge_key(k); });
}

// Required straddling windows between consecutive spikes a, b: the r-windows
// of the 2(r-1)-sequence rev(a)+b.
template <typename HasEdge>
inline bool spikes_adjacent(const Tup& a, const Tup& b, int r, HasEdge&& has_edge) {
    std::vector<Vertex> seq;
    for (int i = a.size() - 1; i >= 0; --i) seq.push_back(a[i]);
    for (Vertex v : b) seq.push_back(v);
    for (size_t i = 0; i + static_cast<size_t>(r) <= seq.size(); ++i)
        if (!has_edge(set_key(seq.data() + i, r))) return false;
    return true;
}

template <typename HasEdge>
inline bool validate_spike_seq(const SpikePath& sp, int r, HasEdge&& has_edge) {
    if (sp.length() < 2) throw std::invalid_argument("validate_spike: need at least 2 spikes");
    std::unordered_set<Vertex> seen;
    for (const Tup& s : sp.spikes) {
        if (s.size() != r - 1) throw std::invalid_argument("validate_spike: spike arity");
        for (Vertex v : s)
            if (!seen.insert(v).second) return false;
    }
    for (size_t i = 0; i + 1 < sp.spikes.size(); ++i)
        if (!spikes_adjacent(sp.spikes[i], sp.spikes[i + 1], r, has_edge)) return false;
    return true;
}

inline bool validate_spike(const SpikePath& sp, const DenseHypergraph& g) {
    return validate_spike_seq(sp, g.uniformity(), [&](SetKey k) { return g.has_edge_key(k); });
}

enum class FanKind { Tight, Spike };

// A tree of paths growing from one root (r-1)-tuple. Node 0 is a sentinel
// for the root; every other node appends one vertex to its parent. mult(c)
// counts distinct truncated paths containing c as a consecutive interval,
// maintained incrementally: each node contributes the intervals that end at
// its own vertex exactly once.
class Fan {
public:
    struct Node {
        Vertex v = -1;
        int parent = -1;
        int depth = 0;     // vertices added after the root
        int part = -1;     // index of the part the vertex was drawn from
        Tup tail;          // last min(r-1, |seq|) sequence vertices, in order
        Tup ext_base;      // exposure base for extending this node
    };

    Fan(int n, int r, Tup root, FanKind kind)
        : n_(n), r_(r), kind_(kind), root_(root) {
        if (root.size() != r - 1) throw std::invalid_argument("fan root must have r-1 vertices");
        Node nd;
        nd.v = -1;
        nd.parent = -1;
        nd.depth = 0;
        nd.tail = root;
        nd.ext_base = root;  // tight: expose the root; spike: first zig base is the root as given
        nodes_.push_back(nd);
        frontier_.push_back(0);
        // intervals wholly inside the root count once
        for (int j = 0; j < root.size(); ++j)
            for (int len = 1; len <= j + 1; ++len)
                bump(root, j - len + 1, j);
    }

    int r() const { return r_; }
    FanKind kind() const { return kind_; }
    const Tup& root() const { return root_; }
    const std::vector<int>& frontier() const { return frontier_; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int frontier_size() const { return static_cast<int>(frontier_.size()); }

    int mult_key(SetKey k) const {
        auto it = mult_.find(k);
        return it == mult_.end() ? 0 : it->second;
    }
    int mult(const std::vector<Vertex>& frag) const {
        if (frag.empty() || static_cast<int>(frag.size()) > r_ - 1)
            throw std::invalid_argument("mult: fragment size must be in [1, r-1]");
        return mult_key(set_key(frag));
    }

    // Append v to node `parent`; returns the new node id.
    int extend(int parent, Vertex v, int part) {
        const Node& p = nodes_[static_cast<size_t>(parent)];
        Node nd;
        nd.v = v;
        nd.parent = parent;
        nd.depth = p.depth + 1;
        nd.part = part;
        nd.tail = shift(p.tail, v);
        if (kind_ == FanKind::Tight) {
            nd.ext_base = shift(p.ext_base, v);
        } else {
            if (nd.depth % (r_ - 1) == 0) {
                // spike completed: direction flips, next base is its reverse
                nd.ext_base = nd.tail.reversed();
            } else {
                nd.ext_base = shift(p.ext_base, v);
            }
        }
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(nd);
        // new intervals all end at v
        const Tup& t = nodes_.back().tail;
        for (int len = 1; len <= t.size(); ++len)
            bump(t, t.size() - len, t.size() - 1);
        return id;
    }

    void set_frontier(std::vector<int> ids) { frontier_ = std::move(ids); }

    bool on_path(int node_id, Vertex v) const {
        if (root_.contains(v)) return true;
        for (int id = node_id; id > 0; id = nodes_[static_cast<size_t>(id)].parent)
            if (nodes_[static_cast<size_t>(id)].v == v) return true;
        return false;
    }

    // Root tuple followed by the added vertices, root-first.
    std::vector<Vertex> path_sequence(int node_id) const {
        std::vector<Vertex> added;
        for (int id = node_id; id > 0; id = nodes_[static_cast<size_t>(id)].parent)
            added.push_back(nodes_[static_cast<size_t>(id)].v);
        std::vector<Vertex> out = root_.to_vector();
        out.insert(out.end(), added.rbegin(), added.rend());
        return out;
    }

    // Spike-mode only: the path as a spike sequence (first spike is the
    // reversed root, then each group of r-1 added vertices in order).
    SpikePath spike_path(int node_id) const {
        std::vector<Vertex> seq = path_sequence(node_id);
        SpikePath sp;
        sp.spikes.push_back(root_.reversed());
        size_t i = root_.n;
        while (i + static_cast<size_t>(r_ - 1) <= seq.size()) {
            Tup s;
            for (int j = 0; j < r_ - 1; ++j) s.push(seq[i + static_cast<size_t>(j)]);
            sp.spikes.push_back(s);
            i += static_cast<size_t>(r_ - 1);
        }
        return sp;
    }

private:
    static Tup shift(const Tup& t, Vertex v) {
        Tup out;
        for (int i = 1; i < t.size(); ++i) out.push(t[i]);
        out.push(v);
        return out;
    }
    void bump(const Tup& t, int from, int to) {
        std::array<Vertex, 8> tmp{};
        int k = 0;
        for (int i = from; i <= to; ++i) tmp[static_cast<size_t>(k++)] = t[i];
        ++mult_[set_key(tmp.data(), k)];
    }

    int n_;
    int r_;
    FanKind kind_;
    Tup root_;
    std::vector<Node> nodes_;
    std::vector<int> frontier_;
    std::unordered_map<SetKey, int, SetKeyHash> mult_;
};

// Per-reservoir-vertex gadget: a seed path on 2r-1 vertices through `a`,
// a spike-path backbone, and one tight connector per backbone level.
//
// backbone[0] is the seed's x-tuple, backbone[2M+1] the seed's u-tuple,
// backbone[M] the far end tuple; connector i joins backbone[i-1] to the
// reverse of backbone[2M+1-i].
struct Absorber {
    Vertex a = -1;
    std::vector<Vertex> seed_seq;            // (x_{r-1},...,x_1, a, u_1,...,u_{r-1})
    SpikePath backbone;                      // 2M+2 spikes
    std::vector<std::vector<Vertex>> connectors;  // M paths, full sequences

    int levels() const { return static_cast<int>(connectors.size()); }
    bool complete() const {
        int M = levels();
        return a >= 0 && !seed_seq.empty() && backbone.length() == 2 * M + 2 && M >= 1;
    }
    Tup spike(int idx) const { return backbone.spikes[static_cast<size_t>(idx)]; }
    // Both traversals start and end with these exact tuples.
    Tup start_tuple() const { return backbone.spikes.back().reversed(); }
    Tup end_tuple() const { return backbone.spikes[static_cast<size_t>(levels())]; }
};

namespace detail {
inline void append_skip(std::vector<Vertex>& out, const std::vector<Vertex>& seq, int skip) {
    out.insert(out.end(), seq.begin() + skip, seq.end());
}
inline void append_tup(std::vector<Vertex>& out, const Tup& t) {
    out.insert(out.end(), t.begin(), t.end());
}
}  // namespace detail

// The two traversal orders of the absorber. include_a follows the
// with-vertex figure (seed, P_1 forward, hop, P_2 backward, ...); the other
// order jumps straight to the first y-spike and runs every P_i the opposite
// way. Both end in the same far tuple.
inline std::vector<Vertex> absorber_traverse(const Absorber& ab, bool include_a) {
    if (!ab.complete()) throw std::runtime_error("absorber_traverse: structurally incomplete");
    int M = ab.levels();
    int r1 = ab.spike(0).size();
    auto X = [&](int i) { return ab.spike(i - 1); };            // i = 1..M
    auto Y = [&](int i) { return ab.spike(2 * M + 1 - i); };    // i = 1..M
    Tup cen = ab.end_tuple();
    std::vector<Vertex> out;
    if (include_a) {
        out = reversed_seq(ab.seed_seq);  // ends with X(1) in stored order
        for (int i = 1; i <= M; ++i) {
            const auto& P = ab.connectors[static_cast<size_t>(i - 1)];
            if (i % 2 == 1) detail::append_skip(out, P, r1);
            else { auto Prev = reversed_seq(P); detail::append_skip(out, Prev, r1); }
            if (i < M) detail::append_tup(out, (i % 2 == 1) ? Y(i + 1) : X(i + 1));
        }
        detail::append_tup(out, cen);
    } else {
        Tup rootv = ab.backbone.spikes.back();  // = u-tuple in seed order
        detail::append_tup(out, rootv.reversed());
        detail::append_tup(out, Y(1));
        for (int i = 1; i <= M; ++i) {
            const auto& P = ab.connectors[static_cast<size_t>(i - 1)];
            if (i % 2 == 1) { auto Prev = reversed_seq(P); detail::append_skip(out, Prev, r1); }
            else detail::append_skip(out, P, r1);
            if (i < M) detail::append_tup(out, (i % 2 == 1) ? X(i + 1) : Y(i + 1));
        }
        detail::append_tup(out, cen);
    }
    return out;
}

// Chain of absorbers; chains[i] runs from absorbers[i].end_tuple() to
// absorbers[i+1].start_tuple() (full sequence including both tuples).
struct ReservoirPath {
    std::vector<Absorber> absorbers;
    std::vector<std::vector<Vertex>> chains;
    std::vector<Vertex> reservoir;  // ascending

    Tup start_tuple() const { return absorbers.front().start_tuple(); }
    Tup end_tuple() const { return absorbers.back().end_tuple(); }

    std::vector<Vertex> vertex_set() const {
        std::vector<Vertex> vs = traverse({});
        std::sort(vs.begin(), vs.end());
        return vs;
    }

    // Tight path on V(P_res) minus `omit`, with the same ends for any omit.
    std::vector<Vertex> traverse(const std::vector<Vertex>& omit) const {
        std::unordered_set<Vertex> omit_set(omit.begin(), omit.end());
        std::unordered_set<Vertex> rset(reservoir.begin(), reservoir.end());
        for (Vertex v : omit)
            if (!rset.count(v)) throw std::invalid_argument("reservoir_traverse: omit not a subset of R");
        std::vector<Vertex> out;
        int r1 = absorbers.front().spike(0).size();
        for (size_t i = 0; i < absorbers.size(); ++i) {
            const Absorber& ab = absorbers[i];
            std::vector<Vertex> seg = absorber_traverse(ab, omit_set.count(ab.a) == 0);
            detail::append_skip(out, seg, out.empty() ? 0 : r1);
            if (i + 1 < absorbers.size())
                detail::append_skip(out, chains[i], r1);
        }
        return out;
    }
};

}  // namespace tighthc
