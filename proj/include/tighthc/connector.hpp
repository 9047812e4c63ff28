#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tighthc/common.hpp"
#include "tighthc/oracle.hpp"
#include "tighthc/params.hpp"
#include "tighthc/paths.hpp"

namespace tighthc {

// One line per exposure when tracing is on.
struct TraceEvent {
    const char* phase;
    Tup base;
    int candidates;
    int hits;
    int rejected_path;    // goodness (i)
    int rejected_degE;    // goodness (ii)
    int rejected_mult;    // goodness (iii)
    int rejected_danger;  // goodness (iv)
};
using TraceSink = std::function<void(const TraceEvent&)>;

struct FanHealthReport {
    bool p1 = true;  // every path extended; leaves fresh
    bool p2 = true;  // e(E[S]) bounded
    bool p3 = true;  // deg_E over leaf fragments bounded
    bool p4 = true;  // mult over leaf fragments bounded, leaves distinct
    bool p5 = true;  // deg_D over leaf fragments bounded
    double p2_margin = 0;  // measured / bound
    double p3_margin = 0;
    double p4_margin = 0;
    double p5_margin = 0;
    int p4_leaf_violations = 0;
    int min_children = -1;
};

struct ConnectStats {
    std::uint64_t exposures = 0;
    std::uint64_t e_edges_added = 0;
    int fan_restarts = 0;
    int blocked_pairs_skipped = 0;
    int pairs_tested = 0;
    double e_growth_ratio = 0;  // added / |S|^(r-2)
    std::vector<FanHealthReport> health;
};

struct ConnectRequest {
    Tup u, v;
    std::vector<Vertex> S;  // working set, ascending
    ExposureOracle* oracle = nullptr;
    const Params* params = nullptr;
    TraceSink trace;            // optional
    bool collect_health = false;
    int Q_override = 0;         // 0 = params rule
};

struct ConnectResult {
    std::vector<Vertex> path;  // starts with u, ends with v
    ConnectStats stats;
};

struct SpikeConnectResult {
    SpikePath path;  // first spike u, last spike v, even length
    ConnectStats stats;
};

// Blocked pair: some r consecutive vertices of w followed by reversed x
// contain an edge of E.
inline bool is_blocked(const Tup& w, const Tup& x, const ExposureHypergraph& E) {
    if (w.size() != x.size()) throw std::invalid_argument("is_blocked: tuple sizes differ");
    for (Vertex a : w)
        if (x.contains(a)) throw std::invalid_argument("is_blocked: tuples overlap");
    std::array<Vertex, 16> seq{};
    int len = 0;
    for (Vertex a : w) seq[static_cast<size_t>(len++)] = a;
    for (int i = x.size() - 1; i >= 0; --i) seq[static_cast<size_t>(len++)] = x[i];
    int r = w.size() + 1;
    for (int i = 0; i + r <= len; ++i) {
        // any (r-1)-subset of the window may be the exposure edge
        for (int drop = 0; drop < r; ++drop) {
            std::array<Vertex, 8> sub{};
            int k = 0;
            for (int j = 0; j < r; ++j)
                if (j != drop) sub[static_cast<size_t>(k++)] = seq[static_cast<size_t>(i + j)];
            if (E.contains(set_key(sub.data(), k))) return true;
        }
    }
    return false;
}

namespace conn_detail {

struct GoodnessCounters {
    int path = 0, degE = 0, mult = 0, danger = 0;
};

// Goodness of b for extending the path ending at node `node_id` of `fan`.
// Rejection reasons are tallied for tracing.
inline bool is_good_node(Vertex b, const Fan& fan, int node_id, const ExposureHypergraph& E,
                         const DangerHypergraph& D, const VertexBitmap& Sb, const Params& pa,
                         GoodnessCounters* ctr) {
    const int r = pa.r;
    if (fan.on_path(node_id, b)) {
        if (ctr) ++ctr->path;
        return false;
    }
    const Tup& a = fan.node(node_id).ext_base;
    const int m = a.size();  // r-1
    const double S_size = static_cast<double>(Sb.size());
    // every (possibly empty) fragment c of a's vertex set
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        int k = __builtin_popcount(mask);
        std::vector<Vertex> frag;
        frag.reserve(static_cast<size_t>(k) + 1);
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) frag.push_back(a[i]);
        frag.push_back(b);
        if (k <= r - 2) {
            double mstd = static_cast<double>(E.degree(frag, Sb));
            if (mstd > pa.degE_threshold(k, S_size)) {
                if (ctr) ++ctr->degE;
                return false;
            }
        }
        if (static_cast<int>(frag.size()) <= r - 1) {
            if (static_cast<double>(fan.mult(frag)) > pa.mult_threshold(k, S_size)) {
                if (ctr) ++ctr->mult;
                return false;
            }
        }
        if (k <= r - 3) {
            if (static_cast<double>(D.degree(frag, Sb)) > pa.degD_threshold(k, S_size)) {
                if (ctr) ++ctr->danger;
                return false;
            }
        } else if (k == r - 2) {
            // a dangerous tuple must never become a leaf
            if (D.contains(set_key(frag))) {
                if (ctr) ++ctr->danger;
                return false;
            }
        }
    }
    return true;
}

}  // namespace conn_detail

// Public form of the goodness predicate: `a` must be the end tuple of a
// unique path of the fan (leaf ends are distinct by construction).
inline bool is_good(Vertex b, const Tup& a, const Fan& fan, const ExposureHypergraph& E,
                    const DangerHypergraph& D, const std::vector<Vertex>& S, const Params& pa) {
    int node = -1;
    for (int id : fan.frontier())
        if (fan.node(id).ext_base == a) { node = id; break; }
    if (node < 0) throw std::invalid_argument("is_good: tuple is not a frontier end");
    VertexBitmap Sb(0);
    Vertex mx = 0;
    for (Vertex v : S) mx = std::max(mx, v);
    for (Vertex v : a) mx = std::max(mx, v);
    Sb = VertexBitmap(mx + 1);
    for (Vertex v : S) Sb.set(v);
    return conn_detail::is_good_node(b, fan, node, E, D, Sb, pa, nullptr);
}

namespace conn_detail {

struct FanBuildConfig {
    std::vector<std::vector<Vertex>> parts;  // ascending within each part
    int Q = 0;
    int t = 0;
    FanKind kind = FanKind::Tight;
    const char* phase_tag = "fan";
};

struct FanBuildOutcome {
    std::optional<Fan> fan;
    bool extinct = false;       // desk: retryable failure
    std::string fail_detail;
    std::vector<FanHealthReport> health;
    int min_children = 1 << 30;
};

// Algorithm sketch: t steps; steps alternate expansion / continuation in
// blocks of r-1. Expansion adds Add = min(grow, Q+1-NumPaths) extensions
// per path, continuation one. Once the fan has reached Q paths it never
// expands again. In the desk profile a path with no good edge-vertex is
// dropped; the paper profile treats any shortfall as failure.
inline FanBuildOutcome build_fan_once(const Tup& root, const FanBuildConfig& cfg,
                                      const DangerHypergraph& D, ExposureOracle& oracle,
                                      const VertexBitmap& Sb, const Params& pa,
                                      const TraceSink& trace, bool collect_health) {
    const int r = pa.r;
    const int nparts = static_cast<int>(cfg.parts.size());
    FanBuildOutcome out;
    Fan fan(Sb.size(), r, root, cfg.kind);
    bool reached = false;
    for (int step = 1; step <= cfg.t; ++step) {
        bool expand = ((step - 1) % (2 * (r - 1))) < (r - 1);
        int part_idx = (step - 1) % nparts;
        const std::vector<Vertex>& part = cfg.parts[static_cast<size_t>(part_idx)];
        int numpaths = fan.frontier_size();
        std::vector<int> next;
        next.reserve(static_cast<size_t>(std::min(cfg.Q + 2, numpaths * pa.grow)));
        for (int node : fan.frontier()) {
            GoodnessCounters ctr;
            std::vector<Vertex> cands;
            cands.reserve(part.size());
            for (Vertex b : part)
                if (is_good_node(b, fan, node, oracle.exposure_graph(), D, Sb, pa, &ctr))
                    cands.push_back(b);
            std::vector<Vertex> hits = oracle.expose(fan.node(node).ext_base, cands);
            if (trace)
                trace(TraceEvent{cfg.phase_tag, fan.node(node).ext_base,
                                 static_cast<int>(cands.size()), static_cast<int>(hits.size()),
                                 ctr.path, ctr.degE, ctr.mult, ctr.danger});
            int children;
            if (expand && !reached) {
                int add = std::min(pa.grow, cfg.Q + 1 - numpaths);
                add = std::max(add, 1);
                children = std::min<int>(add, static_cast<int>(hits.size()));
                if (pa.is_paper() && children < add) {
                    out.fail_detail = "expand shortfall at step " + std::to_string(step);
                    return out;
                }
            } else {
                children = hits.empty() ? 0 : 1;
                if (pa.is_paper() && children == 0) {
                    out.fail_detail = "no good edge-vertex at step " + std::to_string(step);
                    return out;
                }
            }
            out.min_children = std::min(out.min_children, children);
            for (int k = 0; k < children; ++k)
                next.push_back(fan.extend(node, hits[static_cast<size_t>(k)], part_idx));
            numpaths += children - 1;
            if (numpaths >= cfg.Q) reached = true;
        }
        if (next.empty()) {
            out.extinct = true;
            out.fail_detail = "fan extinct at step " + std::to_string(step);
            return out;
        }
        fan.set_frontier(std::move(next));
        if (fan.frontier_size() >= cfg.Q) reached = true;
    }
    (void)collect_health;
    out.fan.emplace(std::move(fan));
    return out;
}

}  // namespace conn_detail

// P1-P5 diagnostics for a built fan. Never alters control flow.
inline FanHealthReport check_fan_health(const Fan& fan, const ExposureHypergraph& E,
                                        const DangerHypergraph& D, const std::vector<Vertex>& S,
                                        const Params& pa, int min_children = -1) {
    FanHealthReport rep;
    const int r = pa.r;
    Vertex mx = 0;
    for (Vertex v : S) mx = std::max(mx, v);
    VertexBitmap Sb(mx + 1);
    for (Vertex v : S) Sb.set(v);
    double S_size = static_cast<double>(S.size());
    auto xi_pow = [&](int e) {
        return pa.is_paper() ? std::exp(e * pa.log_xi) : std::pow(pa.desk_xi, e);
    };
    double xp = pa.is_paper() ? pa.xi_prime : pa.desk_xi_prime;
    rep.min_children = min_children;
    rep.p1 = (min_children != 0);
    for (int id : fan.frontier())
        if (E.contains(set_key(fan.node(id).ext_base))) rep.p1 = false;
    // P2
    double e_in_S = static_cast<double>(E.degree({}, Sb));
    double p2_bound = pa.e_density_cap(S_size) + 20.0 * r * pa.Q;
    rep.p2_margin = e_in_S / std::max(p2_bound, 1.0);
    rep.p2 = e_in_S <= p2_bound;
    // P3-P5 over all nonempty fragments of leaf end tuples
    for (int id : fan.frontier()) {
        const Tup& a = fan.node(id).ext_base;
        int m = a.size();
        for (unsigned mask = 1; mask < (1u << m); ++mask) {
            int k = __builtin_popcount(mask);
            std::vector<Vertex> frag;
            for (int i = 0; i < m; ++i)
                if (mask & (1u << i)) frag.push_back(a[i]);
            if (k < r - 1) {
                double d = static_cast<double>(E.degree(frag, Sb));
                double bound = xi_pow(r - k) * std::pow(S_size, r - 1 - k) + 1.0;
                rep.p3_margin = std::max(rep.p3_margin, d / std::max(bound, 1e-300));
                if (d > bound) rep.p3 = false;
            }
            {
                double mval = static_cast<double>(fan.mult_key(set_key(frag)));
                double bound = xi_pow(r - k) * pa.Q * std::pow(S_size, -k) *
                                   std::pow(std::max(pa.n_log, 1.5), k) + 1.0;
                rep.p4_margin = std::max(rep.p4_margin, mval / std::max(bound, 1e-300));
                if (mval > bound) rep.p4 = false;
                if (k == r - 1 && mval != 1) {
                    rep.p4 = false;
                    ++rep.p4_leaf_violations;
                }
            }
            if (k >= 1 && k <= r - 2) {
                double d = static_cast<double>(D.degree(frag, Sb));
                double bound = std::pow(xp * S_size, r - k - 1);
                rep.p5_margin = std::max(rep.p5_margin, d / std::max(bound, 1e-300));
                if (d > bound) rep.p5 = false;
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// danger set
// ---------------------------------------------------------------------------

// D = sets whose some ordering is blocked for at least xi' * Q leaves of the
// first fan. Exact computation: an E-edge inside a window of w+rev(x) either
// equals set(w) (blocks every x for that leaf), equals set(x) (every leaf),
// or mixes w- and x-vertices, which pins specific coordinates of x; the
// pinned-signature masses are combined per candidate tuple.
inline DangerHypergraph danger_set(const std::vector<Tup>& leaves, const std::vector<Vertex>& Sprime,
                                   const ExposureHypergraph& E, const Params& pa, int n_ambient) {
    const int r = pa.r;
    DangerHypergraph D(n_ambient, r);
    if (leaves.empty()) return D;
    const double threshold = pa.danger_threshold();

    VertexBitmap Sp(n_ambient);
    for (Vertex v : Sprime) Sp.set(v);

    // (a) leaves that are themselves exposure edges block every tuple
    int n_selfblocked = 0;
    for (const Tup& w : leaves)
        if (E.contains(set_key(w))) ++n_selfblocked;

    // (b) exposure edges inside S' are blocked for every leaf
    if (static_cast<double>(leaves.size()) >= threshold) {
        for (SetKey e : E.edges()) {
            bool inside = true;
            for (Vertex v : key_vertices(e))
                if (!Sp.test(v)) { inside = false; break; }
            if (inside) D.insert(e);
        }
    }

    double gap = threshold - static_cast<double>(n_selfblocked);
    if (gap <= 0) {
        // every tuple over S' is blocked by self-blocked leaves alone; the
        // fan that produced such leaves is unusable, so fail loudly rather
        // than materialize |S'|^(r-1) sets
        throw std::runtime_error("danger_set: all tuples dangerous (self-blocked leaves)");
    }

    // (c) mixed edges pin coordinates of x. Signature: assignments
    // (position in x) -> vertex, for each window and injection.
    std::map<std::vector<std::pair<int, Vertex>>, std::vector<int>> sigs;
    std::uint64_t total_incidence = 0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        const Tup& w = leaves[li];
        // edges touching at least one leaf vertex
        std::unordered_set<int> eids;
        for (Vertex v : w)
            for (int idx : E.incident(v)) eids.insert(idx);
        std::vector<int> sorted_eids(eids.begin(), eids.end());
        std::sort(sorted_eids.begin(), sorted_eids.end());
        for (int idx : sorted_eids) {
            auto everts = key_vertices(E.edges()[static_cast<size_t>(idx)]);
            std::vector<Vertex> ew, ex;
            for (Vertex v : everts)
                (w.contains(v) ? ew : ex).push_back(v);
            if (ex.empty() || ew.empty()) continue;  // handled by (a)/(b)
            bool ex_ok = true;
            for (Vertex v : ex)
                if (!Sp.test(v)) { ex_ok = false; break; }
            if (!ex_ok) continue;
            // window j (1-based): w-part {w_j..w_{r-1}}, x positions r-j..r-1
            for (int j = 1; j <= r - 1; ++j) {
                bool fits = true;
                for (Vertex v : ew) {
                    bool in_tail = false;
                    for (int i = j - 1; i < r - 1; ++i)
                        if (w[i] == v) { in_tail = true; break; }
                    if (!in_tail) { fits = false; break; }
                }
                if (!fits || static_cast<int>(ex.size()) > j) continue;
                // all injections of ex into positions {r-j..r-1} (1-based)
                std::vector<int> slots;
                for (int ppos = r - j; ppos <= r - 1; ++ppos) slots.push_back(ppos);
                std::sort(ex.begin(), ex.end());
                std::vector<int> chosen(ex.size());
                std::function<void(size_t, unsigned)> rec = [&](size_t d, unsigned used) {
                    if (d == ex.size()) {
                        std::vector<std::pair<int, Vertex>> sig;
                        for (size_t q = 0; q < ex.size(); ++q)
                            sig.emplace_back(chosen[q], ex[q]);
                        std::sort(sig.begin(), sig.end());
                        bool consistent = true;
                        for (size_t q = 1; q < sig.size(); ++q)
                            if (sig[q].first == sig[q - 1].first) consistent = false;
                        if (consistent) {
                            auto& lv = sigs[sig];
                            if (lv.empty() || lv.back() != static_cast<int>(li)) {
                                lv.push_back(static_cast<int>(li));
                                ++total_incidence;
                            }
                        }
                        return;
                    }
                    for (size_t s = 0; s < slots.size(); ++s) {
                        if (used & (1u << s)) continue;
                        chosen[d] = slots[s];
                        rec(d + 1, used | (1u << s));
                    }
                };
                rec(0, 0);
            }
        }
    }

    if (static_cast<double>(total_incidence) < gap) return D;  // nothing mixed can reach the bar

    // Compose consistent signatures per full coordinate pattern. Positions
    // never pinned by any surviving combination are wildcards; a dangerous
    // wildcard pattern expands over S' (bounded, or we refuse). The search
    // prunes on remaining mass, so the typical case (mass below the bar)
    // costs nothing.
    std::vector<std::pair<std::vector<std::pair<int, Vertex>>, std::vector<int>>> sig_list(
        sigs.begin(), sigs.end());
    std::vector<std::uint64_t> suffix_mass(sig_list.size() + 1, 0);
    for (size_t i = sig_list.size(); i-- > 0;)
        suffix_mass[i] = suffix_mass[i + 1] + sig_list[i].second.size();

    std::map<std::vector<std::pair<int, Vertex>>, std::vector<int>> patterns;
    std::uint64_t work = 0;
    std::function<void(size_t, std::vector<std::pair<int, Vertex>>, std::vector<int>)> compose =
        [&](size_t i, std::vector<std::pair<int, Vertex>> assign, std::vector<int> leavesAcc) {
            if (++work > 2000000)
                throw std::runtime_error("danger_set: signature explosion (unsupported regime)");
            if (static_cast<double>(leavesAcc.size() + suffix_mass[i]) < gap) return;
            if (i == sig_list.size()) {
                if (!assign.empty() && static_cast<double>(leavesAcc.size()) >= gap)
                    patterns[assign] = leavesAcc;
                return;
            }
            compose(i + 1, assign, leavesAcc);
            // merge sig i if consistent
            const auto& s = sig_list[i].first;
            std::vector<std::pair<int, Vertex>> merged = assign;
            bool ok = true;
            for (auto& pv : s) {
                bool found = false;
                for (auto& av : merged) {
                    if (av.first == pv.first) {
                        if (av.second != pv.second) ok = false;
                        found = true;
                    }
                    if (av.second == pv.second && av.first != pv.first) ok = false;
                }
                if (!ok) break;
                if (!found) merged.push_back(pv);
            }
            if (!ok) return;
            std::sort(merged.begin(), merged.end());
            std::vector<int> u;
            std::set_union(leavesAcc.begin(), leavesAcc.end(), sig_list[i].second.begin(),
                           sig_list[i].second.end(), std::back_inserter(u));
            compose(i + 1, std::move(merged), std::move(u));
        };
    compose(0, {}, {});

    // expand patterns into explicit (r-1)-sets
    std::uint64_t budget = 200000;
    for (auto& [assign, lv] : patterns) {
        (void)lv;
        std::vector<Vertex> fixed;
        for (auto& pv : assign) fixed.push_back(pv.second);
        std::sort(fixed.begin(), fixed.end());
        if (std::adjacent_find(fixed.begin(), fixed.end()) != fixed.end()) continue;
        int free = (r - 1) - static_cast<int>(fixed.size());
        if (free == 0) {
            D.insert(set_key(fixed));
            continue;
        }
        // choose `free` extra vertices from S' \ fixed
        std::vector<Vertex> pool;
        for (Vertex v : Sprime)
            if (!std::binary_search(fixed.begin(), fixed.end(), v)) pool.push_back(v);
        double combos = 1;
        for (int i = 0; i < free; ++i) combos = combos * (static_cast<double>(pool.size()) - i) / (i + 1);
        if (combos > static_cast<double>(budget))
            throw std::runtime_error("danger_set: wildcard expansion too large (unsupported regime)");
        detail::for_each_combination(static_cast<int>(pool.size()), free, [&](const std::vector<Vertex>& c) {
            std::vector<Vertex> full = fixed;
            for (Vertex ci : c) full.push_back(pool[static_cast<size_t>(ci)]);
            std::sort(full.begin(), full.end());
            D.insert(set_key(full));
        });
    }
    return D;
}

// ---------------------------------------------------------------------------
// connect / spike_connect
// ---------------------------------------------------------------------------

namespace conn_detail {

struct SidePath {
    int leaf = 0;                   // fan node id
    std::vector<Vertex> extension;  // BFS vertices beyond the leaf (tight, r>=4)
    Tup end;                        // end tuple after extension (path order)
};

inline Tup seq_tail(const std::vector<Vertex>& seq, int k) {
    Tup t;
    for (size_t i = seq.size() - static_cast<size_t>(k); i < seq.size(); ++i) t.push(seq[i]);
    return t;
}

// The r-1 junction windows between end tuples: tight pairs concatenate
// w + rev(x), spike pairs rev(w) + x. Outer two windows come from the leaf
// exposures; the r-3 middle windows are decided one fresh base each.
inline std::vector<SetKey> junction_windows(const Tup& w, const Tup& x, FanKind kind) {
    std::vector<Vertex> seq;
    if (kind == FanKind::Tight) {
        for (Vertex v : w) seq.push_back(v);
        for (int i = x.size() - 1; i >= 0; --i) seq.push_back(x[i]);
    } else {
        for (int i = w.size() - 1; i >= 0; --i) seq.push_back(w[i]);
        for (Vertex v : x) seq.push_back(v);
    }
    int r = w.size() + 1;
    std::vector<SetKey> out;
    for (size_t i = 0; i + static_cast<size_t>(r) <= seq.size(); ++i)
        out.push_back(set_key(seq.data() + i, r));
    return out;
}

// Vertex of the partner tuple participating in this side's outer window.
inline Vertex outer_partner_vertex(const Tup& partner_end, FanKind kind, bool u_side) {
    if (kind == FanKind::Tight) return partner_end[partner_end.size() - 1];
    // spike: windows of rev(A)+B use B_1 against A's base and A_1 against B's
    (void)u_side;
    return partner_end[0];
}

}  // namespace conn_detail

class Connector {
public:
    // Tight-path connection (the Connecting Lemma engine).
    static Outcome<ConnectResult> connect(ConnectRequest req) { return run_tight(req); }

    // Spike-path variant; the returned path has even length with end spikes
    // exactly u and v.
    static Outcome<SpikeConnectResult> spike_connect(ConnectRequest req) { return run_spike(req); }

    // Standalone BuildFan: grow a fan of Q paths of depth t from `root`,
    // the i-th extension drawn from parts[(i-1) mod |parts|].
    static Outcome<Fan> build_fan(const Tup& root, const std::vector<std::vector<Vertex>>& parts,
                                  const DangerHypergraph& D, ExposureOracle& oracle,
                                  const Params& pa, int Q, int t, FanKind kind = FanKind::Tight,
                                  TraceSink trace = {}) {
        Vertex mx = 0;
        for (const auto& part : parts)
            for (Vertex v : part) mx = std::max(mx, v);
        VertexBitmap Sb(mx + 1);
        for (const auto& part : parts)
            for (Vertex v : part) Sb.set(v);
        conn_detail::FanBuildConfig cfg;
        cfg.parts = parts;
        cfg.Q = Q;
        cfg.t = t;
        cfg.kind = kind;
        cfg.phase_tag = "build_fan";
        auto out = conn_detail::build_fan_once(root, cfg, D, oracle, Sb, pa, trace, false);
        if (!out.fan) return Outcome<Fan>::failure(Stage::Fan, out.fail_detail);
        return Outcome<Fan>::success(std::move(*out.fan));
    }

private:
    struct Prep {
        std::vector<std::vector<Vertex>> partsU, partsV;
        std::vector<Vertex> poolU, poolV;
        VertexBitmap Sb;
        int Q = 0, t = 0;
        size_t e_before = 0;
    };

    static Prep prepare(ConnectRequest& req, FanKind kind) {
        const Params& pa = *req.params;
        const int r = pa.r;
        if (req.u.size() != r - 1 || req.v.size() != r - 1)
            throw std::invalid_argument("connect: end tuples must have r-1 vertices");
        if (!req.u.distinct() || !req.v.distinct())
            throw std::invalid_argument("connect: end tuple vertices must be distinct");
        for (Vertex a : req.u)
            if (req.v.contains(a)) throw std::invalid_argument("connect: u and v overlap");
        if (static_cast<int>(req.S.size()) < 8 * (r - 1))
            throw std::invalid_argument("connect: S too small to split into 8(r-1) nonempty parts");
        if (!std::is_sorted(req.S.begin(), req.S.end()))
            std::sort(req.S.begin(), req.S.end());
        Vertex mx = req.S.back();
        for (Vertex a : req.u) mx = std::max(mx, a);
        for (Vertex a : req.v) mx = std::max(mx, a);
        Prep prep;
        prep.Sb = VertexBitmap(mx + 1);
        for (Vertex a : req.S) {
            if (req.u.contains(a) || req.v.contains(a))
                throw std::invalid_argument("connect: S intersects the end tuples");
            prep.Sb.set(a);
        }
        const ExposureHypergraph& E = req.oracle->exposure_graph();
        // precondition: e(E[S]) below the density cap
        double e_in_S = static_cast<double>(E.degree({}, prep.Sb));
        if (e_in_S > pa.e_density_cap(static_cast<double>(req.S.size())))
            throw std::invalid_argument("connect: exposure graph too dense inside S");
        // precondition: no exposure edge meets both S and the end tuples
        for (Vertex a : req.u.to_vector())
            check_no_mixed_edge(E, a, prep.Sb);
        for (Vertex a : req.v.to_vector())
            check_no_mixed_edge(E, a, prep.Sb);

        size_t half = req.S.size() / 2;
        prep.poolU.assign(req.S.begin(), req.S.begin() + static_cast<std::ptrdiff_t>(half));
        prep.poolV.assign(req.S.begin() + static_cast<std::ptrdiff_t>(half), req.S.end());
        int ppf = pa.parts_per_fan(static_cast<int>(half));
        prep.partsU = split_parts(prep.poolU, ppf);
        prep.partsV = split_parts(prep.poolV, ppf);
        prep.Q = req.Q_override > 0 ? req.Q_override : pa.Q;
        int part_size = static_cast<int>(prep.partsU[0].size());
        prep.t = pa.is_paper() ? pa.t : (pa.t > 0 ? pa.t : pa.t_rule_desk(prep.Q, part_size));
        if (kind == FanKind::Spike) {
            // leaves must sit on spike boundaries
            int m = (prep.t + r - 2) / (r - 1);
            prep.t = std::max(1, m) * (r - 1);
        }
        prep.e_before = E.edge_count();
        return prep;
    }

    static void check_no_mixed_edge(const ExposureHypergraph& E, Vertex a, const VertexBitmap& Sb) {
        for (int idx : E.incident(a)) {
            auto vs = key_vertices(E.edges()[static_cast<size_t>(idx)]);
            for (Vertex v : vs)
                if (v < Sb.size() && Sb.test(v))
                    throw std::invalid_argument(
                        "connect: exposure edge intersects both S and an end tuple");
        }
    }

    static std::vector<std::vector<Vertex>> split_parts(const std::vector<Vertex>& pool, int k) {
        std::vector<std::vector<Vertex>> parts(static_cast<size_t>(k));
        for (size_t i = 0; i < pool.size(); ++i)
            parts[i * static_cast<size_t>(k) / pool.size()].push_back(pool[i]);
        return parts;
    }

    // Build one fan, with desk-profile part-rotation restarts after
    // extinction (a rotated call re-exposes nothing: candidate pools for
    // every base differ from the failed attempt's).
    static conn_detail::FanBuildOutcome build_fan_retrying(
        const Tup& root, std::vector<std::vector<Vertex>> parts, int Q, int t, FanKind kind,
        const DangerHypergraph& D, ExposureOracle& oracle, const VertexBitmap& Sb,
        const Params& pa, const TraceSink& trace, bool health, ConnectStats& stats,
        const char* tag) {
        conn_detail::FanBuildConfig cfg;
        cfg.parts = std::move(parts);
        cfg.Q = Q;
        cfg.t = t;
        cfg.kind = kind;
        cfg.phase_tag = tag;
        int attempts = 1 + (pa.is_paper() || cfg.parts.size() < 2 ? 0 : pa.fan_restarts);
        conn_detail::FanBuildOutcome out;
        for (int at = 0; at < attempts; ++at) {
            if (at > 0) {
                std::rotate(cfg.parts.begin(), cfg.parts.begin() + 1, cfg.parts.end());
                ++stats.fan_restarts;
            }
            out = conn_detail::build_fan_once(root, cfg, D, oracle, Sb, pa, trace, health);
            if (out.fan || !out.extinct) return out;
        }
        return out;
    }

    struct LinkHit {
        int u_idx, v_idx;
        std::vector<Vertex> u_ext, v_ext;
    };

    // Common link step: expose every frontier end once against the partner
    // vertices it could join, then scan pairs in index order, skipping
    // blocked ones, and decide the middle windows with one fresh base each.
    // Equal end-sets (possible among BFS-extended frontiers) share a single
    // exposure through the cache.
    static std::optional<LinkHit> link(const std::vector<conn_detail::SidePath>& us,
                                       const std::vector<conn_detail::SidePath>& vs,
                                       ExposureOracle& oracle, const Params& pa,
                                       ConnectStats& stats, FanKind kind) {
        (void)pa;
        const ExposureHypergraph& E = oracle.exposure_graph();
        std::unordered_map<SetKey, std::pair<std::vector<Vertex>, std::vector<Vertex>>, SetKeyHash>
            cache;  // base set -> (pool exposed, hits)
        auto expose_side = [&](const std::vector<conn_detail::SidePath>& side,
                               const std::vector<conn_detail::SidePath>& other,
                               bool u_side) {
            std::vector<std::vector<Vertex>> hits(side.size());
            for (size_t i = 0; i < side.size(); ++i) {
                const Tup& end = side[i].end;
                SetKey base_key = set_key(end);
                auto cached = cache.find(base_key);
                if (cached != cache.end()) {
                    hits[i] = cached->second.second;
                    continue;
                }
                if (E.contains(base_key)) continue;  // self-blocked end: skip
                std::vector<Vertex> cands;
                for (const auto& o : other) {
                    Vertex pv = conn_detail::outer_partner_vertex(o.end, kind, u_side);
                    if (end.contains(pv)) continue;
                    cands.push_back(pv);
                }
                std::sort(cands.begin(), cands.end());
                cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
                // freshness screen: drop candidates whose r-set houses a
                // recorded base (those pairs are blocked anyway)
                std::vector<Vertex> safe;
                for (Vertex z : cands) {
                    bool unsafe = false;
                    for (int drop = 0; drop < end.size() && !unsafe; ++drop) {
                        Tup f;
                        for (int q = 0; q < end.size(); ++q)
                            if (q != drop) f.push(end[q]);
                        f.push(z);
                        if (E.contains(set_key(f))) unsafe = true;
                    }
                    if (!unsafe) safe.push_back(z);
                    else ++stats.blocked_pairs_skipped;
                }
                hits[i] = oracle.expose(end, safe);
                cache.emplace(base_key, std::make_pair(std::move(safe), hits[i]));
            }
            return hits;
        };
        std::vector<std::vector<Vertex>> hits_u = expose_side(us, vs, true);
        std::vector<std::vector<Vertex>> hits_v = expose_side(vs, us, false);

        for (size_t i = 0; i < us.size(); ++i) {
            for (size_t j = 0; j < vs.size(); ++j) {
                const Tup& w = us[i].end;
                const Tup& x = vs[j].end;
                Vertex need_u = conn_detail::outer_partner_vertex(x, kind, true);
                Vertex need_v = conn_detail::outer_partner_vertex(w, kind, false);
                if (!std::binary_search(hits_u[i].begin(), hits_u[i].end(), need_u)) continue;
                if (!std::binary_search(hits_v[j].begin(), hits_v[j].end(), need_v)) continue;
                // vertex disjointness across sides
                bool overlap = false;
                for (Vertex a : w)
                    if (x.contains(a)) overlap = true;
                for (Vertex a : us[i].extension)
                    if (x.contains(a) || std::find(vs[j].extension.begin(), vs[j].extension.end(),
                                                   a) != vs[j].extension.end())
                        overlap = true;
                if (overlap) continue;
                bool blocked = (kind == FanKind::Tight)
                                   ? is_blocked(w, x, E)
                                   : is_blocked(w.reversed(), x.reversed(), E);
                if (blocked) { ++stats.blocked_pairs_skipped; continue; }
                ++stats.pairs_tested;
                // middle windows
                auto windows = conn_detail::junction_windows(w, x, kind);
                bool all = true;
                for (size_t k = 1; k + 1 < windows.size() && all; ++k) {
                    SetKey wk = windows[k];
                    if (oracle.covered(wk)) {
                        all = oracle.is_present(wk);
                        continue;
                    }
                    auto vsk = key_vertices(wk);
                    // fresh single-candidate base: drop the lowest vertex
                    Tup base;
                    for (size_t q = 1; q < vsk.size(); ++q) base.push(vsk[q]);
                    std::vector<Vertex> one{vsk[0]};
                    auto got = oracle.expose(base, one);
                    all = !got.empty();
                }
                if (!all) continue;
                // outer windows are present by the exposures above
                return LinkHit{static_cast<int>(i), static_cast<int>(j), us[i].extension,
                               vs[j].extension};
            }
        }
        return std::nullopt;
    }

    static Outcome<ConnectResult> run_tight(ConnectRequest& req) {
        const Params& pa = *req.params;
        const int r = pa.r;
        Prep prep = prepare(req, FanKind::Tight);
        ConnectStats stats;
        DangerHypergraph empty_D(prep.Sb.size(), r);
        auto fu_out = build_fan_retrying(req.u, prep.partsU, prep.Q, prep.t, FanKind::Tight,
                                         empty_D, *req.oracle, prep.Sb, pa, req.trace,
                                         req.collect_health, stats, "fan_u");
        if (!fu_out.fan)
            return finish_fail<ConnectResult>(Stage::Connect, "fan_u: " + fu_out.fail_detail);
        Fan fu = std::move(*fu_out.fan);

        std::vector<Tup> leavesU;
        for (int id : fu.frontier()) leavesU.push_back(fu.node(id).ext_base);
        DangerHypergraph D = danger_set(leavesU, prep.poolV, req.oracle->exposure_graph(), pa,
                                        prep.Sb.size());

        auto fv_out = build_fan_retrying(req.v.reversed(), prep.partsV, prep.Q, prep.t,
                                         FanKind::Tight, D, *req.oracle, prep.Sb, pa, req.trace,
                                         req.collect_health, stats, "fan_v");
        if (!fv_out.fan)
            return finish_fail<ConnectResult>(Stage::Connect, "fan_v: " + fv_out.fail_detail);
        Fan fv = std::move(*fv_out.fan);

        if (req.collect_health) {
            stats.health.push_back(check_fan_health(fu, req.oracle->exposure_graph(), empty_D,
                                                    req.S, pa, fu_out.min_children));
            stats.health.push_back(check_fan_health(fv, req.oracle->exposure_graph(), D, req.S,
                                                    pa, fv_out.min_children));
        }

        // BFS extensions for r >= 4
        int d1 = (r - 2) / 2, d2 = (r - 3) / 2;
        auto us = bfs_extend(fu, d1, prep.poolU, *req.oracle, pa, prep.Sb);
        auto vsd = bfs_extend(fv, d2, prep.poolV, *req.oracle, pa, prep.Sb);

        auto hit = link(us, vsd, *req.oracle, pa, stats, FanKind::Tight);
        if (!hit)
            return finish_fail<ConnectResult>(Stage::Connect, "no unblocked linked pair");

        ConnectResult res;
        auto useq = fu.path_sequence(us[static_cast<size_t>(hit->u_idx)].leaf);
        for (Vertex z : hit->u_ext) useq.push_back(z);
        auto vseq = fv.path_sequence(vsd[static_cast<size_t>(hit->v_idx)].leaf);
        for (Vertex z : hit->v_ext) vseq.push_back(z);
        res.path = useq;
        for (auto it = vseq.rbegin(); it != vseq.rend(); ++it) res.path.push_back(*it);

        finalize_stats(req, prep, stats);
        res.stats = stats;
        // postconditions
        if (!validate_tight_seq(res.path, r, [&](SetKey k) { return req.oracle->is_present(k); }))
            throw std::runtime_error("connect: produced path fails validation");
        check_result_shape(req, prep, res.path);
        return Outcome<ConnectResult>::success(std::move(res));
    }

    static Outcome<SpikeConnectResult> run_spike(ConnectRequest& req) {
        const Params& pa = *req.params;
        const int r = pa.r;
        Prep prep = prepare(req, FanKind::Spike);
        ConnectStats stats;
        DangerHypergraph empty_D(prep.Sb.size(), r);
        auto fu_out = build_fan_retrying(req.u.reversed(), prep.partsU, prep.Q, prep.t,
                                         FanKind::Spike, empty_D, *req.oracle, prep.Sb, pa,
                                         req.trace, req.collect_health, stats, "spike_fan_u");
        if (!fu_out.fan)
            return finish_fail<SpikeConnectResult>(Stage::SpikeConnect,
                                                   "fan_u: " + fu_out.fail_detail);
        Fan fu = std::move(*fu_out.fan);

        std::vector<Tup> leavesU;
        for (int id : fu.frontier()) leavesU.push_back(fu.node(id).ext_base);
        // blocked test for spike pairs works on reversed tuples; danger over
        // reversed end tuples gives the same underlying sets
        DangerHypergraph D = danger_set(leavesU, prep.poolV, req.oracle->exposure_graph(), pa,
                                        prep.Sb.size());

        auto fv_out = build_fan_retrying(req.v.reversed(), prep.partsV, prep.Q, prep.t,
                                         FanKind::Spike, D, *req.oracle, prep.Sb, pa, req.trace,
                                         req.collect_health, stats, "spike_fan_v");
        if (!fv_out.fan)
            return finish_fail<SpikeConnectResult>(Stage::SpikeConnect,
                                                   "fan_v: " + fv_out.fail_detail);
        Fan fv = std::move(*fv_out.fan);

        if (req.collect_health) {
            stats.health.push_back(check_fan_health(fu, req.oracle->exposure_graph(), empty_D,
                                                    req.S, pa, fu_out.min_children));
            stats.health.push_back(check_fan_health(fv, req.oracle->exposure_graph(), D, req.S,
                                                    pa, fv_out.min_children));
        }

        std::vector<conn_detail::SidePath> us, vsd;
        for (int id : fu.frontier())
            us.push_back({id, {}, conn_detail::seq_tail(fu.path_sequence(id), r - 1)});
        for (int id : fv.frontier())
            vsd.push_back({id, {}, conn_detail::seq_tail(fv.path_sequence(id), r - 1)});

        auto hit = link(us, vsd, *req.oracle, pa, stats, FanKind::Spike);
        if (!hit)
            return finish_fail<SpikeConnectResult>(Stage::SpikeConnect, "no unblocked linked pair");

        SpikeConnectResult res;
        SpikePath su = fu.spike_path(us[static_cast<size_t>(hit->u_idx)].leaf);
        SpikePath sv = fv.spike_path(vsd[static_cast<size_t>(hit->v_idx)].leaf);
        res.path.spikes = su.spikes;
        for (auto it = sv.spikes.rbegin(); it != sv.spikes.rend(); ++it)
            res.path.spikes.push_back(*it);

        finalize_stats(req, prep, stats);
        res.stats = stats;
        if (!validate_spike_seq(res.path, r, [&](SetKey k) { return req.oracle->is_present(k); }))
            throw std::runtime_error("spike_connect: produced path fails validation");
        if (res.path.length() % 2 != 0)
            throw std::runtime_error("spike_connect: odd spike count");
        return Outcome<SpikeConnectResult>::success(std::move(res));
    }

    // All tight extensions of `depth` edges from each frontier end, by
    // breadth-first exposure inside the fan's own pool half. Ends sharing a
    // vertex set share one exposure; a path only extends along candidates
    // that exposure actually covered.
    static std::vector<conn_detail::SidePath> bfs_extend(const Fan& fan, int depth,
                                                         const std::vector<Vertex>& pool,
                                                         ExposureOracle& oracle, const Params& pa,
                                                         const VertexBitmap& Sb) {
        (void)Sb;
        std::vector<conn_detail::SidePath> frontier;
        const int r = pa.r;
        for (int id : fan.frontier())
            frontier.push_back({id, {}, conn_detail::seq_tail(fan.path_sequence(id), r - 1)});
        const ExposureHypergraph& E = oracle.exposure_graph();
        for (int d = 0; d < depth; ++d) {
            std::unordered_map<SetKey, std::vector<Vertex>, SetKeyHash> cache;
            std::vector<conn_detail::SidePath> next;
            for (const auto& sp : frontier) {
                SetKey bk = set_key(sp.end);
                auto seq = fan.path_sequence(sp.leaf);
                std::unordered_set<Vertex> onpath(seq.begin(), seq.end());
                for (Vertex z : sp.extension) onpath.insert(z);
                std::vector<Vertex> hits;
                auto cached = cache.find(bk);
                if (cached != cache.end()) {
                    hits = cached->second;
                } else {
                    if (E.contains(bk)) continue;
                    std::vector<Vertex> cands;
                    for (Vertex z : pool) {
                        if (sp.end.contains(z)) continue;
                        bool unsafe = false;
                        for (int drop = 0; drop < sp.end.size() && !unsafe; ++drop) {
                            Tup f;
                            for (int q = 0; q < sp.end.size(); ++q)
                                if (q != drop) f.push(sp.end[q]);
                            f.push(z);
                            if (E.contains(set_key(f))) unsafe = true;
                        }
                        if (!unsafe) cands.push_back(z);
                    }
                    hits = oracle.expose(sp.end, cands);
                    cache.emplace(bk, hits);
                }
                for (Vertex z : hits) {
                    if (onpath.count(z)) continue;
                    conn_detail::SidePath ns = sp;
                    ns.extension.push_back(z);
                    Tup ne;
                    for (int q = 1; q < ns.end.size(); ++q) ne.push(ns.end[q]);
                    ne.push(z);
                    ns.end = ne;
                    next.push_back(std::move(ns));
                }
            }
            frontier = std::move(next);
        }
        return frontier;
    }

    template <typename T>
    static Outcome<T> finish_fail(Stage st, std::string detail) {
        return Outcome<T>::failure(st, std::move(detail));
    }

    static void finalize_stats(const ConnectRequest& req, const Prep& prep, ConnectStats& stats) {
        const ExposureHypergraph& E = req.oracle->exposure_graph();
        stats.e_edges_added = E.edge_count() - prep.e_before;
        double denom = std::pow(static_cast<double>(req.S.size()), req.params->r - 2);
        stats.e_growth_ratio = static_cast<double>(stats.e_edges_added) / std::max(denom, 1.0);
        if (stats.e_growth_ratio > req.params->growth_cap_K)
            throw std::runtime_error("connect: exposure growth exceeded K |S|^(r-2)");
        // exposure locality: every new base lies in S + u + v
        for (size_t i = prep.e_before; i < E.edge_count(); ++i) {
            for (Vertex a : key_vertices(E.edges()[i])) {
                bool ok = (a < prep.Sb.size() && prep.Sb.test(a)) || req.u.contains(a) ||
                          req.v.contains(a);
                if (!ok) throw std::runtime_error("connect: exposure escaped S+u+v");
            }
        }
    }

    static void check_result_shape(const ConnectRequest& req, const Prep& prep,
                                   const std::vector<Vertex>& path) {
        const int r = req.params->r;
        for (int i = 0; i < r - 1; ++i)
            if (path[static_cast<size_t>(i)] != req.u[i])
                throw std::runtime_error("connect: path does not start with u");
        for (int i = 0; i < r - 1; ++i)
            if (path[path.size() - static_cast<size_t>(r - 1) + static_cast<size_t>(i)] != req.v[i])
                throw std::runtime_error("connect: path does not end with v");
        int interior = static_cast<int>(path.size()) - 2 * (r - 1);
        if (interior > 2 * prep.t + 2 * r)
            throw std::runtime_error("connect: interior too long");
        for (size_t i = static_cast<size_t>(r - 1); i + static_cast<size_t>(r - 1) < path.size(); ++i)
            if (!prep.Sb.test(path[i]))
                throw std::runtime_error("connect: interior vertex outside S");
    }
};

}  // namespace tighthc
