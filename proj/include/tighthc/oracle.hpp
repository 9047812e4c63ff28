#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tighthc/common.hpp"
#include "tighthc/hypergraph.hpp"

namespace tighthc {

// (r-1)-uniform hypergraph of search bases, with degree queries into a set.
class ExposureHypergraph {
public:
    ExposureHypergraph() = default;
    ExposureHypergraph(int n, int r) : n_(n), r_(r), incidence_(static_cast<size_t>(n)) {}

    int uniformity() const { return r_ - 1; }
    size_t edge_count() const { return edges_.size(); }
    const std::vector<SetKey>& edges() const { return edges_; }
    bool contains(SetKey k) const { return set_.count(k) != 0; }

    bool insert(const Tup& base) {
        SetKey k = set_key(base);
        if (!set_.insert(k).second) return false;
        int idx = static_cast<int>(edges_.size());
        edges_.push_back(k);
        for (Vertex v : base) incidence_[static_cast<size_t>(v)].push_back(idx);
        return true;
    }

    const std::vector<int>& incident(Vertex v) const { return incidence_[static_cast<size_t>(v)]; }

    // deg_E(f, S): edges e >= f with e \ f <= S. |f| = 0 counts e(E[S]).
    int degree(const std::vector<Vertex>& f, const VertexBitmap& S) const {
        if (static_cast<int>(f.size()) > r_ - 2)
            throw std::invalid_argument("exposure_degree: |f| must be <= r-2");
        if (f.empty()) {
            int c = 0;
            for (SetKey k : edges_)
                if (subset_of(k, S)) ++c;
            return c;
        }
        Vertex pivot = f[0];
        for (Vertex v : f)
            if (incidence_[static_cast<size_t>(v)].size() < incidence_[static_cast<size_t>(pivot)].size()) pivot = v;
        int c = 0;
        for (int idx : incidence_[static_cast<size_t>(pivot)]) {
            auto vs = key_vertices(edges_[static_cast<size_t>(idx)]);
            int hit = 0;
            bool ok = true;
            for (Vertex v : vs) {
                if (std::find(f.begin(), f.end(), v) != f.end()) ++hit;
                else if (!S.test(v)) { ok = false; break; }
            }
            if (ok && hit == static_cast<int>(f.size())) ++c;
        }
        return c;
    }

    int degree(const std::vector<Vertex>& f, const std::vector<Vertex>& S) const {
        VertexBitmap sb(n_);
        for (Vertex v : S) sb.set(v);
        return degree(f, sb);
    }

private:
    static bool subset_of(SetKey k, const VertexBitmap& S) {
        SetKey rest = k;
        while (rest >> 20) {
            if (!S.test(static_cast<Vertex>(static_cast<std::uint32_t>(rest) & 0xfffff))) return false;
            rest >>= 20;
        }
        return true;
    }

    int n_ = 0;
    int r_ = 0;
    std::vector<SetKey> edges_;
    std::unordered_set<SetKey, SetKeyHash> set_;
    std::vector<std::vector<int>> incidence_;
};

// (r-1)-uniform set of dangerous tuples, indexed like the exposure graph.
class DangerHypergraph {
public:
    DangerHypergraph() = default;
    DangerHypergraph(int n, int r) : n_(n), r_(r), incidence_(static_cast<size_t>(n)) {}

    size_t edge_count() const { return edges_.size(); }
    const std::vector<SetKey>& edges() const { return edges_; }
    bool contains(SetKey k) const { return set_.count(k) != 0; }

    void insert(SetKey k) {
        if (!set_.insert(k).second) return;
        int idx = static_cast<int>(edges_.size());
        edges_.push_back(k);
        for (Vertex v : key_vertices(k)) incidence_[static_cast<size_t>(v)].push_back(idx);
    }

    int degree(const std::vector<Vertex>& f, const VertexBitmap& S) const {
        if (f.empty()) {
            int c = 0;
            for (SetKey k : edges_) {
                bool ok = true;
                for (Vertex v : key_vertices(k))
                    if (!S.test(v)) { ok = false; break; }
                if (ok) ++c;
            }
            return c;
        }
        Vertex pivot = f[0];
        for (Vertex v : f)
            if (incidence_[static_cast<size_t>(v)].size() < incidence_[static_cast<size_t>(pivot)].size()) pivot = v;
        int c = 0;
        for (int idx : incidence_[static_cast<size_t>(pivot)]) {
            auto vs = key_vertices(edges_[static_cast<size_t>(idx)]);
            int hit = 0;
            bool ok = true;
            for (Vertex v : vs) {
                if (std::find(f.begin(), f.end(), v) != f.end()) ++hit;
                else if (!S.test(v)) { ok = false; break; }
            }
            if (ok && hit == static_cast<int>(f.size())) ++c;
        }
        return c;
    }

private:
    int n_ = 0;
    int r_ = 0;
    std::vector<SetKey> edges_;
    std::unordered_set<SetKey, SetKeyHash> set_;
    std::vector<std::vector<int>> incidence_;
};

// A shrinking candidate pool shared with the greedy phases: vertex v is a
// candidate at version k iff it is a member and has not joined the path
// before step k. Lets exposure records stay O(1) instead of copying pools.
struct DynamicPool {
    VertexBitmap member;
    std::vector<Vertex> member_list;  // ascending
    std::vector<std::int32_t> consumed_at;  // per vertex; INT32_MAX = never

    explicit DynamicPool(int n) : member(n), consumed_at(static_cast<size_t>(n), std::numeric_limits<std::int32_t>::max()) {}
};

enum class OracleMode { Lazy, PreSampled };

// Simulates G^(r)(n,p) by deciding r-sets at exposure time. The decision for
// an r-set is a pure function of (seed, canonical set), so replaying any
// query sequence reproduces all answers and decision order cannot change
// outcomes. Strict mode flags any r-set whose randomness would be consumed
// by two different exposures.
class ExposureOracle {
public:
    ExposureOracle(int n, int r, double p, std::uint64_t seed,
                   OracleMode mode = OracleMode::Lazy, bool strict = true)
        : n_(n), r_(r), p_(p), seed_(seed), mode_(mode), strict_(strict),
          E_(n, r), base_count_(static_cast<size_t>(n), 0) {
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("p must be in [0,1]");
        if (r < 3) throw std::invalid_argument("r must be >= 3");
        if (r > kMaxUniformity) throw std::invalid_argument("r too large");
        if (n < r) throw std::invalid_argument("n must be >= r");
        if (n >= kMaxVertexCount) throw std::invalid_argument("n too large");
        if (mode_ == OracleMode::PreSampled) {
            double count = 1.0;
            for (int i = 0; i < r; ++i) count = count * (n - i) / (i + 1);
            if (count > 1e7) throw std::invalid_argument("pre-sampled mode capped at 1e7 r-sets");
            presampled_.emplace(n, r);
            detail::for_each_combination(n, r, [&](const std::vector<Vertex>& c) {
                if (decide_key(set_key(c))) presampled_->add_edge(c);
            });
        }
    }

    int vertex_count() const { return n_; }
    int uniformity() const { return r_; }
    double p() const { return p_; }
    std::uint64_t seed() const { return seed_; }
    bool strict() const { return strict_; }
    OracleMode mode() const { return mode_; }
    const ExposureHypergraph& exposure_graph() const { return E_; }
    std::uint64_t exposure_count() const { return records_.size(); }
    std::uint64_t draw_count() const { return draws_; }

    // Presence of an r-set under this oracle's randomness (pure).
    bool is_present(SetKey rset) const { return decide_key(rset); }

    int register_pool(std::shared_ptr<DynamicPool> pool) {
        pools_.push_back(std::move(pool));
        return static_cast<int>(pools_.size()) - 1;
    }

    // Reveal the r-sets base+{v} for v in `cands` (ascending, disjoint from
    // base). Returns the vertices whose r-set is present. Records the base
    // into E regardless of hits.
    std::vector<Vertex> expose(const Tup& base, const std::vector<Vertex>& cands) {
        pre_expose(base, cands.begin(), cands.end());
        std::vector<Vertex> hits;
        for (Vertex v : cands) {
            ++draws_;
            if (decide_with(base, v)) hits.push_back(v);
        }
        finish_expose(base, Record{set_key(base), base, true, cands, -1, -1});
        return hits;
    }

    // As expose(), but stops evaluating at the first hit. The whole pool
    // still counts as decided (decisions are pure, so the unevaluated
    // suffix is fixed either way).
    std::optional<Vertex> expose_lowest(const Tup& base, const std::vector<Vertex>& cands) {
        pre_expose(base, cands.begin(), cands.end());
        std::optional<Vertex> hit;
        for (Vertex v : cands) {
            ++draws_;
            if (decide_with(base, v)) { hit = v; break; }
        }
        finish_expose(base, Record{set_key(base), base, true, cands, -1, -1});
        return hit;
    }

    // Pool-backed variant for the greedy phases: candidates are the pool
    // members not yet consumed at `version`, minus `skip` (ascending).
    std::optional<Vertex> expose_pool_lowest(const Tup& base, int pool_id, std::int32_t version) {
        const DynamicPool& pool = *pools_[static_cast<size_t>(pool_id)];
        pre_expose_pool(base, pool, version);
        std::optional<Vertex> hit;
        for (Vertex v : pool.member_list) {
            if (pool.consumed_at[static_cast<size_t>(v)] < version) continue;
            if (base.contains(v)) continue;
            ++draws_;
            if (decide_with(base, v)) { hit = v; break; }
        }
        finish_expose(base, Record{set_key(base), base, false, {}, pool_id, version});
        return hit;
    }

    // Has this exact r-set been covered by any exposure so far?
    bool covered(SetKey rset) const {
        auto vs = key_vertices(rset);
        Tup t(vs);
        for (int drop = 0; drop < t.size(); ++drop) {
            Tup f;
            for (int i = 0; i < t.size(); ++i)
                if (i != drop) f.push(t[i]);
            auto it = base_records_.find(set_key(f));
            if (it == base_records_.end()) continue;
            for (int rid : it->second)
                if (record_covers(records_[static_cast<size_t>(rid)], t[drop])) return true;
        }
        return false;
    }

    // Graph of all r-sets decided present so far. In pre-sampled mode every
    // r-set is decided at construction.
    DenseHypergraph decided_edges() const {
        if (mode_ == OracleMode::PreSampled) return *presampled_;
        DenseHypergraph g(n_, r_);
        for_each_decided([&](const Tup& base, Vertex v, bool present) {
            if (!present) return;
            std::vector<Vertex> e = base.to_vector();
            e.push_back(v);
            g.add_edge(e);
        });
        return g;
    }

    // Invoke fn(base, candidate, present) for every covered r-set.
    template <typename F>
    void for_each_decided(F&& fn) const {
        std::unordered_set<SetKey, SetKeyHash> seen;
        for (const Record& rec : records_) {
            auto visit = [&](Vertex v) {
                std::vector<Vertex> e = rec.base.to_vector();
                e.push_back(v);
                SetKey k = set_key(e);
                if (!seen.insert(k).second) return;
                fn(rec.base, v, decide_key(k));
            };
            if (rec.explicit_cands) {
                for (Vertex v : rec.cands) visit(v);
            } else {
                const DynamicPool& pool = *pools_[static_cast<size_t>(rec.pool_id)];
                for (Vertex v : pool.member_list) {
                    if (pool.consumed_at[static_cast<size_t>(v)] < rec.version) continue;
                    if (rec.base.contains(v)) continue;
                    visit(v);
                }
            }
        }
    }

    // Debug dump: model parameters, every covered r-set with its decision,
    // and the recorded bases.
    std::string dump_json() const {
        std::ostringstream out;
        out << "{\"n\":" << n_ << ",\"r\":" << r_ << ",\"p\":" << p_
            << ",\"seed\":" << seed_ << ",\"decided\":[";
        bool first = true;
        for_each_decided([&](const Tup& base, Vertex v, bool present) {
            std::vector<Vertex> e = base.to_vector();
            e.push_back(v);
            std::sort(e.begin(), e.end());
            out << (first ? "" : ",") << "[";
            for (size_t i = 0; i < e.size(); ++i) out << (i ? "," : "") << e[i];
            out << "," << (present ? 1 : 0) << "]";
            first = false;
        });
        out << "],\"bases\":[";
        for (size_t i = 0; i < E_.edges().size(); ++i) {
            auto vs = key_vertices(E_.edges()[i]);
            out << (i ? "," : "") << "[";
            for (size_t j = 0; j < vs.size(); ++j) out << (j ? "," : "") << vs[j];
            out << "]";
        }
        out << "]}";
        return out.str();
    }

private:
    struct Record {
        SetKey base_key;
        Tup base;
        bool explicit_cands;
        std::vector<Vertex> cands;  // ascending when explicit
        int pool_id;
        std::int32_t version;
    };

    bool decide_key(SetKey k) const {
        std::uint64_t h = seed_ ^ 0x5bf03635d1f4b0a7ULL;
        h = mix64(h ^ static_cast<std::uint64_t>(k));
        h = mix64(h ^ static_cast<std::uint64_t>(k >> 64));
        return static_cast<double>(h >> 11) * 0x1.0p-53 < p_;
    }

    bool decide_with(const Tup& base, Vertex v) const {
        std::array<Vertex, 8> tmp{};
        for (int i = 0; i < base.size(); ++i) tmp[static_cast<size_t>(i)] = base[i];
        tmp[static_cast<size_t>(base.size())] = v;
        return decide_key(set_key(tmp.data(), base.size() + 1));
    }

    bool record_covers(const Record& rec, Vertex v) const {
        if (rec.base.contains(v)) return false;
        if (rec.explicit_cands)
            return std::binary_search(rec.cands.begin(), rec.cands.end(), v);
        const DynamicPool& pool = *pools_[static_cast<size_t>(rec.pool_id)];
        return pool.member.test(v) && pool.consumed_at[static_cast<size_t>(v)] >= rec.version;
    }

    void validate_base(const Tup& base) const {
        if (base.size() != r_ - 1) throw std::invalid_argument("expose: base must have r-1 vertices");
        if (!base.distinct()) throw std::invalid_argument("expose: base vertices must be distinct");
        for (Vertex v : base)
            if (v < 0 || v >= n_) throw std::invalid_argument("expose: base vertex out of range");
    }

    template <typename It>
    void pre_expose(const Tup& base, It first, It last) {
        validate_base(base);
        Vertex prev = -1;
        for (It it = first; it != last; ++it) {
            Vertex v = *it;
            if (v < 0 || v >= n_) throw std::invalid_argument("expose: candidate out of range");
            if (v <= prev) throw std::invalid_argument("expose: candidates must be strictly ascending");
            if (base.contains(v)) throw std::invalid_argument("expose: candidate overlaps base");
            prev = v;
        }
        if (!strict_) return;
        SetKey bk = set_key(base);
        auto same = base_records_.find(bk);
        for (It it = first; it != last; ++it) check_fresh(base, bk, same, *it);
    }

    void pre_expose_pool(const Tup& base, const DynamicPool& pool, std::int32_t version) {
        validate_base(base);
        if (!strict_) return;
        SetKey bk = set_key(base);
        auto same = base_records_.find(bk);
        for (Vertex v : pool.member_list) {
            if (pool.consumed_at[static_cast<size_t>(v)] < version) continue;
            if (base.contains(v)) continue;
            check_fresh(base, bk, same, v);
        }
    }

    void check_fresh(const Tup& base, SetKey bk,
                     std::unordered_map<SetKey, std::vector<int>, SetKeyHash>::const_iterator same,
                     Vertex v) const {
        if (same != base_records_.end()) {
            for (int rid : same->second)
                if (record_covers(records_[static_cast<size_t>(rid)], v))
                    throw violation(base, v);
        }
        if (base_count_[static_cast<size_t>(v)] == 0) return;
        for (int drop = 0; drop < base.size(); ++drop) {
            Tup f;
            for (int i = 0; i < base.size(); ++i)
                if (i != drop) f.push(base[i]);
            f.push(v);
            SetKey fk = set_key(f);
            if (fk == bk) continue;
            auto it = base_records_.find(fk);
            if (it == base_records_.end()) continue;
            for (int rid : it->second)
                if (record_covers(records_[static_cast<size_t>(rid)], base[drop]))
                    throw violation(base, v);
        }
    }

    DisciplineViolation violation(const Tup& base, Vertex v) const {
        std::vector<Vertex> e = base.to_vector();
        e.push_back(v);
        std::sort(e.begin(), e.end());
        std::ostringstream msg;
        msg << "double exposure of r-set {";
        for (size_t i = 0; i < e.size(); ++i) msg << (i ? "," : "") << e[i];
        msg << "}";
        return DisciplineViolation(msg.str());
    }

    void finish_expose(const Tup& base, Record rec) {
        int rid = static_cast<int>(records_.size());
        records_.push_back(std::move(rec));
        base_records_[records_.back().base_key].push_back(rid);
        if (E_.insert(base))
            for (Vertex v : base) ++base_count_[static_cast<size_t>(v)];
    }

    int n_;
    int r_;
    double p_;
    std::uint64_t seed_;
    OracleMode mode_;
    bool strict_;
    ExposureHypergraph E_;
    std::optional<DenseHypergraph> presampled_;
    std::vector<Record> records_;
    std::unordered_map<SetKey, std::vector<int>, SetKeyHash> base_records_;
    std::vector<int> base_count_;
    std::vector<std::shared_ptr<DynamicPool>> pools_;
    std::uint64_t draws_ = 0;
};

}  // namespace tighthc
