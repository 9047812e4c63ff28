#pragma once

#include <chrono>
#include <cmath>
#include <string>

#include <json.hpp>

#include "tighthc/hamilton.hpp"
#include "tighthc/oracle.hpp"
#include "tighthc/params.hpp"
#include "tighthc/verify.hpp"

namespace tighthc {

struct RunConfig {
    int n = 0;
    int r = 3;
    double p = 0;       // used when kappa <= 0
    double kappa = 0;   // p = min(1, kappa * ln^3 n / n) when positive
    Profile profile = Profile::Desk;
    bool strict = true;
    bool verify_success = true;
    std::vector<std::pair<std::string, double>> overrides;

    double resolve_p(int n_eff) const {
        if (kappa > 0) {
            double ln = std::log(static_cast<double>(n_eff));
            return std::min(1.0, kappa * ln * ln * ln / n_eff);
        }
        return p;
    }
    Params resolve_params(int n_eff, double p_eff) const {
        Params pa = Params::make(profile, r, n_eff, p_eff);
        for (const auto& [k, v] : overrides) pa.apply_override(k, v);
        return pa;
    }
};

struct TrialRecord {
    nlohmann::ordered_json json;  // full machine-readable record
    TrialOutcome outcome = TrialOutcome::Fail;
    bool verified = false;
    double wall_ms = 0;
};

// Execute one seeded trial end to end; on success the cycle is re-verified
// against the oracle's decided edges with the independent verifier.
inline TrialRecord run_trial(const RunConfig& cfg, std::uint64_t seed) {
    TrialRecord rec;
    double p_eff = cfg.resolve_p(cfg.n);
    Params pa = cfg.resolve_params(cfg.n, p_eff);
    ExposureOracle oracle(cfg.n, cfg.r, p_eff, seed, OracleMode::Lazy, cfg.strict);

    auto t0 = std::chrono::steady_clock::now();
    HamiltonRun run = HamiltonFinder::run(cfg.n, oracle, pa);
    auto t1 = std::chrono::steady_clock::now();
    rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.outcome = run.outcome;

    if (run.outcome == TrialOutcome::Success && cfg.verify_success) {
        DenseHypergraph decided = oracle.decided_edges();
        rec.verified = verify_tight_hamilton(run.cycle, decided);
    }

    nlohmann::ordered_json j;
    j["n"] = cfg.n;
    j["r"] = cfg.r;
    j["p"] = p_eff;
    j["seed"] = seed;
    j["profile"] = (cfg.profile == Profile::Paper) ? "paper" : "desk";
    switch (run.outcome) {
        case TrialOutcome::Success: j["outcome"] = "success"; break;
        case TrialOutcome::Fail: j["outcome"] = std::string("fail(") + stage_name(run.fail_stage) + ")"; break;
        case TrialOutcome::Violation: j["outcome"] = "violation"; break;
    }
    if (!run.detail.empty()) j["detail"] = run.detail;
    if (run.outcome == TrialOutcome::Success) {
        j["cycle"] = run.cycle;
        j["verified"] = rec.verified;
    }
    nlohmann::ordered_json stats;
    stats["exposures"] = run.exposures;
    stats["draws"] = run.draws;
    stats["e_size"] = run.e_size;
    stats["reservoir_size"] = run.R_size;
    stats["used_twice"] = run.R1_used_twice;
    stats["close_interior"] = run.close_interior;
    stats["fan_restarts"] = run.fan_restarts;
    stats["max_e_growth_ratio"] = run.max_e_growth_ratio;
    stats["wall_ms"] = rec.wall_ms;
    nlohmann::ordered_json times;
    times["reservoir_ms"] = run.times.reservoir_ms;
    times["coverU_ms"] = run.times.coverU_ms;
    times["coverL_ms"] = run.times.coverL_ms;
    times["close_ms"] = run.times.close_ms;
    times["absorb_ms"] = run.times.absorb_ms;
    stats["stage_ms"] = times;
    j["stats"] = stats;
    rec.json = std::move(j);
    return rec;
}

// The record with wall-clock fields removed; equality of this view is the
// determinism contract.
inline nlohmann::ordered_json record_without_clock(const nlohmann::ordered_json& j) {
    nlohmann::ordered_json out = j;
    if (out.contains("stats")) {
        out["stats"].erase("wall_ms");
        out["stats"].erase("stage_ms");
    }
    return out;
}

}  // namespace tighthc
