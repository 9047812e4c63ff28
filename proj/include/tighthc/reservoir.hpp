#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tighthc/common.hpp"
#include "tighthc/connector.hpp"
#include "tighthc/oracle.hpp"
#include "tighthc/params.hpp"
#include "tighthc/paths.hpp"

namespace tighthc {

// Deterministic split of the working set S = [0, |S|): the reservoir takes
// the lowest ids, then three equal slices U1 (seed paths), U2 (spike
// backbones, in cells) and U3 (connectors, in cells). Cell sizes and |R|
// are solved from the absorber footprint estimate so the structures fit.
struct Partition {
    std::vector<Vertex> S;
    std::vector<Vertex> R;
    std::vector<Vertex> U1, U2, U3;
    std::vector<std::vector<Vertex>> u2_cells, u3_cells;
    std::vector<int> u2_use, u3_use;
    int cell_cap = 0;        // applications per cell
    int est_t = 0;           // desk fan depth estimate used for sizing
    int est_M = 0;           // backbone levels estimate
    VertexBitmap consumed;   // vertices already on reservoir structures
    int u1_used = 0;

    int s_size() const { return static_cast<int>(S.size()); }
};

namespace res_detail {

struct Footprint {
    int t = 0, M = 0;
    int u1_per = 0, u2_per = 0, u3_per_connect = 0;
};

inline Footprint estimate_footprint(const Params& pa, int cell) {
    Footprint f;
    int r = pa.r;
    int Qres = pa.q_link_driven();
    int pool = cell / 2;
    int ppf = pa.parts_per_fan(pool);
    int part = std::max(1, pool / std::max(1, ppf));
    f.t = pa.is_paper() ? pa.t : pa.t_rule_desk(Qres, part);
    int m = (f.t + r - 2) / (r - 1);
    f.M = std::max(1, m);
    f.u1_per = 2 * (r - 1);
    f.u2_per = 2 * f.M * (r - 1);
    f.u3_per_connect = 2 * f.t;  // interior estimate per tight connector
    return f;
}

}  // namespace res_detail

inline Partition partition_sets(int n, const Params& pa) {
    Partition part;
    const int r = pa.r;
    int s_size = static_cast<int>(std::llround(pa.s_frac * n));
    if (s_size < 8 * (r - 1) + 8)
        throw std::invalid_argument("partition_sets: working set infeasibly small");
    part.S.resize(static_cast<size_t>(s_size));
    std::iota(part.S.begin(), part.S.end(), 0);

    int cell_target = std::max(16 * (r - 1),
                               static_cast<int>(std::ceil(4.0 * pa.n_log / pa.p)));
    int desired_R = std::max(8, static_cast<int>(std::ceil(pa.kappa * pa.n_log / pa.p)));

    // Fit |R| against the footprint estimate; constraints shrink as R does.
    // The desk rule prefers at least 8 reservoir vertices but degrades to
    // fewer when the budget cannot host their absorbers.
    int chosen_R = -1;
    res_detail::Footprint fp;
    for (int R = std::min(desired_R, s_size / 4); R >= 1; --R) {
        int u = (s_size - R) / 3;
        int cell = std::min(cell_target, u);
        if (cell < 8 * (r - 1)) continue;
        fp = res_detail::estimate_footprint(pa, cell);
        long long need_u1 = 2LL * R * fp.u1_per;  // half of U1 stays unused
        long long need_u2 = static_cast<long long>(std::ceil(1.3 * R * fp.u2_per));
        long long conns = static_cast<long long>(R) * fp.M + (R - 1);
        long long need_u3 = static_cast<long long>(std::ceil(1.3 * conns * fp.u3_per_connect));
        if (need_u1 <= u && need_u2 <= u && need_u3 <= u) { chosen_R = R; break; }
    }
    if (chosen_R < 0)
        throw std::invalid_argument("partition_sets: no feasible reservoir size at these (n, p)");

    int u = (s_size - chosen_R) / 3;
    part.R.assign(part.S.begin(), part.S.begin() + chosen_R);
    part.U1.assign(part.S.begin() + chosen_R, part.S.begin() + chosen_R + u);
    part.U2.assign(part.S.begin() + chosen_R + u, part.S.begin() + chosen_R + 2 * u);
    part.U3.assign(part.S.begin() + chosen_R + 2 * u, part.S.begin() + chosen_R + 3 * u);

    int cell = std::min(cell_target, u);
    part.est_t = fp.t;
    part.est_M = fp.M;
    auto cut_cells = [&](const std::vector<Vertex>& pool) {
        std::vector<std::vector<Vertex>> cells;
        size_t i = 0;
        while (i + static_cast<size_t>(cell) <= pool.size()) {
            cells.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(i),
                               pool.begin() + static_cast<std::ptrdiff_t>(i + static_cast<size_t>(cell)));
            i += static_cast<size_t>(cell);
        }
        if (cells.empty()) cells.emplace_back(pool.begin(), pool.end());
        else if (i < pool.size())  // fold the remainder into the last cell
            cells.back().insert(cells.back().end(), pool.begin() + static_cast<std::ptrdiff_t>(i), pool.end());
        return cells;
    };
    part.u2_cells = cut_cells(part.U2);
    part.u3_cells = cut_cells(part.U3);
    part.u2_use.assign(part.u2_cells.size(), 0);
    part.u3_use.assign(part.u3_cells.size(), 0);
    long long apps_u3 = static_cast<long long>(chosen_R) * fp.M + (chosen_R - 1);
    part.cell_cap = std::max<long long>(static_cast<long long>(std::ceil(1.0 / pa.p)),
                                        (apps_u3 + static_cast<long long>(part.u3_cells.size()) - 1) /
                                            static_cast<long long>(part.u3_cells.size()));
    part.consumed = VertexBitmap(n);
    return part;
}

struct ReservoirBuildResult {
    ReservoirPath path;
    Partition partition;
    ConnectStats agg_stats;
    std::vector<SetKey> seed_bases;  // recorded for the end-containment check
};

namespace res_detail {

// Tight path on 2r-1 vertices with `a` in the middle. x_1..x_{r-2} are the
// lowest unused U1 ids; the first exposure yields both x_{r-1} and u_1 (its
// base serves both windows), later exposures one u_j each.
inline Outcome<std::vector<Vertex>> seed_absorber_path(Vertex a, Partition& part,
                                                       ExposureOracle& oracle, const Params& pa,
                                                       std::vector<SetKey>* seed_bases) {
    const int r = pa.r;
    std::vector<Vertex> unused;
    for (Vertex v : part.U1)
        if (!part.consumed.test(v)) unused.push_back(v);
    if (static_cast<int>(unused.size()) * 2 < static_cast<int>(part.U1.size()))
        throw std::invalid_argument("seed_absorber_path: more than half of U1 consumed");
    if (static_cast<int>(unused.size()) < 2 * (r - 1))
        return Outcome<std::vector<Vertex>>::failure(Stage::Reservoir, "U1 exhausted");

    std::vector<Vertex> xs(unused.begin(), unused.begin() + (r - 2));
    std::vector<Vertex> pool(unused.begin() + (r - 2), unused.end());

    Tup base;
    for (Vertex v : xs) base.push(v);
    base.push(a);
    if (seed_bases) seed_bases->push_back(set_key(base));
    std::vector<Vertex> hits = oracle.expose(base, pool);
    if (hits.size() < 2)
        return Outcome<std::vector<Vertex>>::failure(Stage::Reservoir, "seed base found < 2 edges");
    Vertex x_last = hits[0];
    std::vector<Vertex> us{hits[1]};
    xs.push_back(x_last);

    for (int j = 2; j <= r - 1; ++j) {
        // base {x_{r-1-j},...,x_1, a, u_1,...,u_{j-1}}
        Tup bj;
        for (int i = r - 1 - j - 1; i >= 0; --i) bj.push(xs[static_cast<size_t>(i)]);
        bj.push(a);
        for (Vertex uv : us) bj.push(uv);
        if (seed_bases) seed_bases->push_back(set_key(bj));
        std::vector<Vertex> pj;
        for (Vertex v : pool)
            if (v != x_last && std::find(us.begin(), us.end(), v) == us.end()) pj.push_back(v);
        auto hit = oracle.expose_lowest(bj, pj);
        if (!hit)
            return Outcome<std::vector<Vertex>>::failure(Stage::Reservoir, "seed base found no edge");
        us.push_back(*hit);
    }

    std::vector<Vertex> seed;
    for (int i = r - 2; i >= 0; --i) seed.push_back(xs[static_cast<size_t>(i)]);
    seed.push_back(a);
    for (Vertex uv : us) seed.push_back(uv);
    if (!validate_tight_seq(seed, r, [&](SetKey k) { return oracle.is_present(k); }))
        throw std::runtime_error("seed_absorber_path: seed fails validation");
    for (Vertex v : seed)
        if (v != a) part.consumed.set(v), ++part.u1_used;
    return Outcome<std::vector<Vertex>>::success(std::move(seed));
}

// Least-used viable cell, ties by lowest index. A cell is viable when its
// unconsumed slice is large enough, below the application cap, and below
// the exposure-density precondition.
inline int pick_cell(const std::vector<std::vector<Vertex>>& cells, std::vector<int>& use,
                     int cap, const Partition& part, const ExposureOracle& oracle,
                     const Params& pa, std::vector<Vertex>* out_pool) {
    const int r = pa.r;
    int best = -1;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (use[i] >= cap) continue;
        if (best >= 0 && use[i] >= use[static_cast<size_t>(best)]) continue;
        std::vector<Vertex> pool;
        for (Vertex v : cells[i])
            if (!part.consumed.test(v)) pool.push_back(v);
        if (static_cast<int>(pool.size()) < 8 * (r - 1)) continue;
        VertexBitmap pb(pool.back() + 1);
        for (Vertex v : pool) pb.set(v);
        double density = static_cast<double>(oracle.exposure_graph().degree({}, pb));
        if (density > pa.e_density_cap(static_cast<double>(pool.size()))) continue;
        best = static_cast<int>(i);
        *out_pool = std::move(pool);
    }
    return best;
}

}  // namespace res_detail

inline void merge_stats(ConnectStats& into, const ConnectStats& from) {
    into.exposures += from.exposures;
    into.e_edges_added += from.e_edges_added;
    into.fan_restarts += from.fan_restarts;
    into.blocked_pairs_skipped += from.blocked_pairs_skipped;
    into.pairs_tested += from.pairs_tested;
    into.e_growth_ratio = std::max(into.e_growth_ratio, from.e_growth_ratio);
    for (const auto& h : from.health) into.health.push_back(h);
}

// Build the absorber for `a`: seed path, spike backbone between the seed's
// end tuples in a U2 cell, and one tight connector per level in U3 cells.
inline Outcome<Absorber> build_absorber(Vertex a, std::vector<Vertex> seed, Partition& part,
                                        ExposureOracle& oracle, const Params& pa,
                                        ConnectStats* agg) {
    const int r = pa.r;
    Absorber ab;
    ab.a = a;
    ab.seed_seq = std::move(seed);

    Tup x1, ua;
    for (int i = r - 2; i >= 0; --i) x1.push(ab.seed_seq[static_cast<size_t>(i)]);
    for (int i = 0; i < r - 1; ++i) ua.push(ab.seed_seq[static_cast<size_t>(r + i)]);

    std::vector<Vertex> pool;
    int ci = res_detail::pick_cell(part.u2_cells, part.u2_use, part.cell_cap, part, oracle, pa,
                                   &pool);
    if (ci < 0) return Outcome<Absorber>::failure(Stage::Reservoir, "no viable U2 cell");
    ++part.u2_use[static_cast<size_t>(ci)];

    ConnectRequest req;
    req.u = x1;
    req.v = ua;
    req.S = pool;
    req.oracle = &oracle;
    req.params = &pa;
    req.Q_override = pa.is_paper() ? 0 : pa.q_link_driven();
    auto spike = Connector::spike_connect(req);
    if (!spike.ok())
        return Outcome<Absorber>::failure(Stage::Reservoir, "backbone: " + spike.fail->detail);
    if (agg) merge_stats(*agg, spike->stats);
    ab.backbone = spike->path;
    for (size_t i = 1; i + 1 < ab.backbone.spikes.size(); ++i)
        for (Vertex v : ab.backbone.spikes[i]) part.consumed.set(v);

    int M = ab.backbone.length() / 2 - 1;
    for (int lvl = 1; lvl <= M; ++lvl) {
        Tup xi = ab.spike(lvl - 1);
        Tup yi = ab.spike(2 * M + 1 - lvl);
        std::vector<Vertex> cpool;
        int cj = res_detail::pick_cell(part.u3_cells, part.u3_use, part.cell_cap, part, oracle,
                                       pa, &cpool);
        if (cj < 0) return Outcome<Absorber>::failure(Stage::Reservoir, "no viable U3 cell");
        ++part.u3_use[static_cast<size_t>(cj)];
        ConnectRequest creq;
        creq.u = xi;
        creq.v = yi.reversed();
        creq.S = cpool;
        creq.oracle = &oracle;
        creq.params = &pa;
        creq.Q_override = pa.is_paper() ? 0 : pa.q_link_driven();
        auto conn = Connector::connect(creq);
        if (!conn.ok())
            return Outcome<Absorber>::failure(Stage::Reservoir,
                                              "connector " + std::to_string(lvl) + ": " +
                                                  conn.fail->detail);
        if (agg) merge_stats(*agg, conn->stats);
        for (size_t q = static_cast<size_t>(r - 1); q + static_cast<size_t>(r - 1) < conn->path.size(); ++q)
            part.consumed.set(conn->path[q]);
        ab.connectors.push_back(std::move(conn->path));
    }

    auto present = [&](SetKey k) { return oracle.is_present(k); };
    auto with_a = absorber_traverse(ab, true);
    auto without_a = absorber_traverse(ab, false);
    if (!validate_tight_seq(with_a, r, present) || !validate_tight_seq(without_a, r, present))
        throw std::runtime_error("build_absorber: traversal validation failed");
    return Outcome<Absorber>::success(std::move(ab));
}

// Lemma-3 style construction: one absorber per reservoir vertex, chained in
// ascending reservoir order by tight connectors in U3 cells.
inline Outcome<ReservoirBuildResult> build_reservoir(int n, ExposureOracle& oracle,
                                                     const Params& pa) {
    ReservoirBuildResult out;
    out.partition = partition_sets(n, pa);
    Partition& part = out.partition;
    const int r = pa.r;
    size_t e_at_start = oracle.exposure_graph().edge_count();

    for (Vertex a : part.R) {
        auto seed = res_detail::seed_absorber_path(a, part, oracle, pa, &out.seed_bases);
        if (!seed.ok())
            return Outcome<ReservoirBuildResult>::failure(seed.fail->stage, seed.fail->detail);
        auto ab = build_absorber(a, std::move(*seed), part, oracle, pa, &out.agg_stats);
        if (!ab.ok())
            return Outcome<ReservoirBuildResult>::failure(ab.fail->stage, ab.fail->detail);
        part.consumed.set(a);
        out.path.absorbers.push_back(std::move(*ab));
    }
    out.path.reservoir = part.R;

    for (size_t i = 0; i + 1 < out.path.absorbers.size(); ++i) {
        Tup from = out.path.absorbers[i].end_tuple();
        Tup to = out.path.absorbers[i + 1].start_tuple();
        std::vector<Vertex> cpool;
        int cj = res_detail::pick_cell(part.u3_cells, part.u3_use, part.cell_cap, part, oracle,
                                       pa, &cpool);
        if (cj < 0)
            return Outcome<ReservoirBuildResult>::failure(Stage::Reservoir, "no viable U3 cell for chain");
        ++part.u3_use[static_cast<size_t>(cj)];
        ConnectRequest creq;
        creq.u = from;
        creq.v = to;
        creq.S = cpool;
        creq.oracle = &oracle;
        creq.params = &pa;
        creq.Q_override = pa.is_paper() ? 0 : pa.q_link_driven();
        auto conn = Connector::connect(creq);
        if (!conn.ok())
            return Outcome<ReservoirBuildResult>::failure(Stage::Reservoir,
                                                          "chain: " + conn.fail->detail);
        merge_stats(out.agg_stats, conn->stats);
        for (size_t q = static_cast<size_t>(r - 1); q + static_cast<size_t>(r - 1) < conn->path.size(); ++q)
            part.consumed.set(conn->path[q]);
        out.path.chains.push_back(std::move(conn->path));
    }

    // Lemma-3 shape checks: the spanning traversal validates, stays in S,
    // and (modulo the seed/link bases at the very ends) no exposure edge
    // sits inside R + u + v.
    auto span = out.path.traverse({});
    if (!validate_tight_seq(span, r, [&](SetKey k) { return oracle.is_present(k); }))
        throw std::runtime_error("build_reservoir: spanning traversal invalid");
    VertexBitmap Sb(n);
    for (Vertex v : part.S) Sb.set(v);
    for (Vertex v : span)
        if (!Sb.test(v)) throw std::runtime_error("build_reservoir: vertex escaped S");
    const auto& E = oracle.exposure_graph();
    for (size_t i = e_at_start; i < E.edge_count(); ++i)
        for (Vertex v : key_vertices(E.edges()[i]))
            if (!Sb.test(v)) throw std::runtime_error("build_reservoir: exposure escaped S");

    Tup u_end = out.path.start_tuple();
    Tup v_end = out.path.end_tuple();
    VertexBitmap ruv(n);
    for (Vertex v : part.R) ruv.set(v);
    for (Vertex v : u_end) ruv.set(v);
    for (Vertex v : v_end) ruv.set(v);
    std::unordered_set<SetKey, SetKeyHash> benign(out.seed_bases.begin(), out.seed_bases.end());
    benign.insert(set_key(u_end));
    benign.insert(set_key(v_end));
    for (SetKey e : E.edges()) {
        bool inside = true;
        for (Vertex v : key_vertices(e))
            if (!ruv.test(v)) { inside = false; break; }
        if (inside && !benign.count(e))
            throw std::runtime_error("build_reservoir: exposure edge inside R+u+v");
    }
    return Outcome<ReservoirBuildResult>::success(std::move(out));
}

}  // namespace tighthc
