#pragma once

#include <chrono>
#include <memory>
#include <numeric>
#include <vector>

#include "tighthc/common.hpp"
#include "tighthc/connector.hpp"
#include "tighthc/oracle.hpp"
#include "tighthc/params.hpp"
#include "tighthc/reservoir.hpp"
#include "tighthc/verify.hpp"

namespace tighthc {

enum class TrialOutcome { Success, Fail, Violation };

struct StageTimes {
    double reservoir_ms = 0, coverU_ms = 0, coverL_ms = 0, close_ms = 0, absorb_ms = 0;
};

struct HamiltonRun {
    TrialOutcome outcome = TrialOutcome::Fail;
    Stage fail_stage = Stage::Reservoir;
    std::string detail;
    CyclicOrder cycle;  // filled on success
    // stats
    std::uint64_t exposures = 0;
    std::uint64_t draws = 0;
    std::uint64_t e_size = 0;
    int R_size = 0;
    int R1_used_twice = 0;
    int close_interior = 0;
    int fan_restarts = 0;
    double max_e_growth_ratio = 0;
    StageTimes times;
};

namespace ham_detail {

struct GreedyState {
    std::vector<Vertex> seq;          // P_res traversal + extensions
    int pres_len = 0;                 // length of the reservoir segment
    std::shared_ptr<DynamicPool> poolL, poolU, poolR;
    int idL = -1, idU = -1, idR = -1;
    int u_left = 0, l_left = 0;
    int l_used = 0;
    std::vector<Vertex> used_twice;   // R'_1 in usage order
    int step = 0;
};

inline Tup tail_tuple(const std::vector<Vertex>& seq, int r) {
    Tup t;
    for (size_t i = seq.size() - static_cast<size_t>(r - 1); i < seq.size(); ++i) t.push(seq[i]);
    return t;
}

class StageTimer {
public:
    explicit StageTimer(double* slot) : slot_(slot), t0_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        auto t1 = std::chrono::steady_clock::now();
        *slot_ += std::chrono::duration<double, std::milli>(t1 - t0_).count();
    }

private:
    double* slot_;
    std::chrono::steady_clock::time_point t0_;
};

}  // namespace ham_detail

// Algorithm outline: build the reservoir path, greedily cover U (vertices of
// S off the reservoir) taking L-vertices on steps == 1, 2 mod 3 and trying U
// on multiples of 3, then cover L falling back to reservoir vertices, close
// the cycle through the unused half of R, and absorb every twice-used
// vertex out of the reservoir segment.
class HamiltonFinder {
public:
    static HamiltonRun run(int n, ExposureOracle& oracle, const Params& pa) {
        HamiltonRun out;
        try {
            run_impl(n, oracle, pa, out);
        } catch (const DisciplineViolation& dv) {
            out.outcome = TrialOutcome::Violation;
            out.detail = dv.what();
        }
        out.exposures = oracle.exposure_count();
        out.draws = oracle.draw_count();
        out.e_size = oracle.exposure_graph().edge_count();
        return out;
    }

private:
    static void run_impl(int n, ExposureOracle& oracle, const Params& pa, HamiltonRun& out) {
        const int r = pa.r;
        Outcome<ReservoirBuildResult> res = Outcome<ReservoirBuildResult>::failure(Stage::Reservoir, "");
        {
            ham_detail::StageTimer timer(&out.times.reservoir_ms);
            try {
                res = build_reservoir(n, oracle, pa);
            } catch (const std::invalid_argument& ia) {
                res = Outcome<ReservoirBuildResult>::failure(Stage::Reservoir, ia.what());
            }
        }
        if (!res.ok()) {
            out.outcome = TrialOutcome::Fail;
            out.fail_stage = Stage::Reservoir;
            out.detail = res.fail->detail;
            return;
        }
        ReservoirBuildResult& rb = *res;
        out.R_size = static_cast<int>(rb.partition.R.size());
        out.fan_restarts = rb.agg_stats.fan_restarts;
        out.max_e_growth_ratio = rb.agg_stats.e_growth_ratio;

        ham_detail::GreedyState st;
        st.seq = rb.path.traverse({});
        st.pres_len = static_cast<int>(st.seq.size());

        // pools: L = complement of S; U = S off the reservoir path; R itself
        st.poolL = std::make_shared<DynamicPool>(n);
        st.poolU = std::make_shared<DynamicPool>(n);
        st.poolR = std::make_shared<DynamicPool>(n);
        VertexBitmap on_pres(n);
        for (Vertex v : st.seq) on_pres.set(v);
        int s_size = rb.partition.s_size();
        for (Vertex v = 0; v < n; ++v) {
            if (v >= s_size) {
                st.poolL->member.set(v);
                st.poolL->member_list.push_back(v);
            } else if (!on_pres.test(v)) {
                st.poolU->member.set(v);
                st.poolU->member_list.push_back(v);
            }
        }
        for (Vertex v : rb.partition.R) {
            st.poolR->member.set(v);
            st.poolR->member_list.push_back(v);
        }
        st.idL = oracle.register_pool(st.poolL);
        st.idU = oracle.register_pool(st.poolU);
        st.idR = oracle.register_pool(st.poolR);
        st.u_left = static_cast<int>(st.poolU->member_list.size());
        st.l_left = static_cast<int>(st.poolL->member_list.size());

        const int l_budget = static_cast<int>(pa.L_budget_frac * n);
        const int step_cap = pa.step_cap_factor * n;
        const int R_budget = out.R_size / 2;

        // Step 2: cover U
        {
            ham_detail::StageTimer timer(&out.times.coverU_ms);
            while (st.u_left > 0) {
                if (++st.step > step_cap) { fail(out, Stage::CoverU, "step cap"); return; }
                Tup end = ham_detail::tail_tuple(st.seq, r);
                bool want_u = (st.step % 3 == 0);
                std::optional<Vertex> got;
                if (want_u) {
                    got = oracle.expose_pool_lowest(end, st.idU, st.step);
                    if (got) { take(st, *got, st.poolU, &st.u_left); continue; }
                }
                if (st.l_used >= l_budget) { fail(out, Stage::CoverU, "L budget exhausted"); return; }
                got = oracle.expose_pool_lowest(end, st.idL, st.step);
                if (!got) { fail(out, Stage::CoverU, "no edge into L"); return; }
                take(st, *got, st.poolL, &st.l_left);
                ++st.l_used;
            }
        }

        // Step 3: cover L, falling back to R
        {
            ham_detail::StageTimer timer(&out.times.coverL_ms);
            while (st.l_left > 0) {
                if (++st.step > step_cap) { fail(out, Stage::CoverL, "step cap"); return; }
                Tup end = ham_detail::tail_tuple(st.seq, r);
                auto got = oracle.expose_pool_lowest(end, st.idL, st.step);
                if (got) { take(st, *got, st.poolL, &st.l_left); continue; }
                if (static_cast<int>(st.used_twice.size()) >= R_budget) {
                    fail(out, Stage::CoverL, "R budget exhausted");
                    return;
                }
                got = oracle.expose_pool_lowest(end, st.idR, st.step);
                if (!got) { fail(out, Stage::CoverL, "no edge into L or R"); return; }
                st.poolR->consumed_at[static_cast<size_t>(*got)] = st.step;
                st.used_twice.push_back(*got);
                st.seq.push_back(*got);
            }
        }
        out.R1_used_twice = static_cast<int>(st.used_twice.size());
        if (static_cast<int>(st.seq.size()) != n + out.R1_used_twice)
            throw std::runtime_error("hamilton: almost-path size mismatch");

        // Step 4: close the ends through the unused reservoir vertices
        std::vector<Vertex> close_interior;
        {
            ham_detail::StageTimer timer(&out.times.close_ms);
            std::vector<Vertex> R1;
            for (Vertex v : rb.partition.R)
                if (st.poolR->consumed_at[static_cast<size_t>(v)] ==
                    std::numeric_limits<std::int32_t>::max())
                    R1.push_back(v);
            if (static_cast<int>(R1.size()) < out.R_size - R_budget)
                throw std::runtime_error("hamilton: |R1| below |R|/2");
            int cell_target = std::max(16 * (r - 1),
                                       static_cast<int>(std::ceil(4.0 * pa.n_log / pa.p)));
            if (static_cast<int>(R1.size()) > cell_target) R1.resize(static_cast<size_t>(cell_target));
            Tup w_end = ham_detail::tail_tuple(st.seq, r);
            Tup u_start;
            for (int i = 0; i < r - 1; ++i) u_start.push(st.seq[static_cast<size_t>(i)]);
            ConnectRequest creq;
            creq.u = w_end;
            creq.v = u_start;
            creq.S = R1;
            creq.oracle = &oracle;
            creq.params = &pa;
            creq.Q_override = pa.is_paper() ? 0 : pa.q_link_driven();
            Outcome<ConnectResult> conn = Outcome<ConnectResult>::failure(Stage::Close, "");
            try {
                conn = Connector::connect(creq);
            } catch (const std::invalid_argument& ia) {
                conn = Outcome<ConnectResult>::failure(Stage::Close, ia.what());
            }
            if (!conn.ok()) { fail(out, Stage::Close, conn.fail->detail); return; }
            out.max_e_growth_ratio = std::max(out.max_e_growth_ratio, conn->stats.e_growth_ratio);
            const auto& cp = conn->path;
            close_interior.assign(cp.begin() + (r - 1), cp.end() - (r - 1));
        }
        out.close_interior = static_cast<int>(close_interior.size());

        // absorb duplicates out of the reservoir segment
        {
            ham_detail::StageTimer timer(&out.times.absorb_ms);
            std::vector<Vertex> dup = st.used_twice;
            dup.insert(dup.end(), close_interior.begin(), close_interior.end());
            std::unordered_set<Vertex> rset(rb.partition.R.begin(), rb.partition.R.end());
            for (Vertex v : dup)
                if (!rset.count(v))
                    throw std::runtime_error("hamilton: twice-used vertex outside R");
            std::sort(dup.begin(), dup.end());
            std::vector<Vertex> rewritten = rb.path.traverse(dup);
            CyclicOrder cycle;
            cycle.reserve(static_cast<size_t>(n));
            cycle.insert(cycle.end(), rewritten.begin(), rewritten.end());
            cycle.insert(cycle.end(), st.seq.begin() + st.pres_len, st.seq.end());
            cycle.insert(cycle.end(), close_interior.begin(), close_interior.end());
            if (static_cast<int>(cycle.size()) != n)
                throw std::runtime_error("hamilton: cycle does not span [n]");
            // cheap self-check against the pure presence function; the full
            // verifier runs in the harness on every success
            for (int i = 0; i < n; ++i) {
                std::array<Vertex, 8> w{};
                for (int j = 0; j < r; ++j)
                    w[static_cast<size_t>(j)] =
                        cycle[static_cast<size_t>((i + j) % n)];
                if (!oracle.is_present(set_key(w.data(), r)))
                    throw std::runtime_error("hamilton: cycle window missing");
            }
            out.cycle = std::move(cycle);
        }
        out.outcome = TrialOutcome::Success;
    }

    static void take(ham_detail::GreedyState& st, Vertex v, std::shared_ptr<DynamicPool>& pool,
                     int* left) {
        pool->consumed_at[static_cast<size_t>(v)] = st.step;
        st.seq.push_back(v);
        --*left;
    }

    static void fail(HamiltonRun& out, Stage stage, std::string detail) {
        out.outcome = TrialOutcome::Fail;
        out.fail_stage = stage;
        out.detail = std::move(detail);
    }
};

}  // namespace tighthc
