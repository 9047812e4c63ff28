#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "tighthc/common.hpp"

namespace tighthc {

enum class Profile { Paper, Desk };

// All tunable constants. The paper profile carries the theorem-scale
// constants; they make every feasible n "too small", so the desk profile
// replaces them with calibrated values while keeping the algorithm's
// structure. Logarithms are natural throughout; sizes round with ceil.
struct Params {
    Profile profile = Profile::Desk;
    int r = 3;

    // theorem-scale constants (kept in log space too; xi^r underflows a
    // double already at r = 5)
    double C = 0, c = 0, xi = 0, xi_prime = 0, delta = 0;
    double log_C = 0, log_c = 0, log_xi = 0, log_xi_prime = 0;

    // fan shape
    int Q = 0;       // target leaf count
    int t = 0;       // fan depth in vertices (even)
    int grow = 8;    // per-step expansion cap (paper: log n)

    // desk calibration knobs
    double gamma = 6.0;        // target expected hits per exposure
    double desk_xi = 0.5;      // replaces xi in goodness thresholds
    double desk_xi_prime = 0.25;
    double slack = 1.0;        // multiplier on goodness thresholds
    int mult_floor = 2;        // additive floor on the mult threshold
    int degE_floor = 4;        // additive floor on the deg_E threshold
    int Q_cap = 5000;
    int t_cap = 64;
    int fan_restarts = 3;      // part-rotation retries after fan extinction
    double desk_c = 0.05;      // e(E[S]) <= desk_c |S|^(r-1) precondition
    double link_target = 8.0;  // wanted expected link count (reservoir Q rule)
    double growth_cap_K = 64.0;  // connect may add at most K |S|^(r-2) bases

    // pipeline geometry
    double s_frac = 0.25;      // |S| = s_frac * n
    double kappa = 1.0;        // desk |R| = max(8, ceil(kappa / p * ln n))
    double L_budget_frac = 5.0 / 8.0;
    int step_cap_factor = 10;  // total greedy extension steps <= factor * n

    double n_log = 0;          // ln n of the ambient instance
    double p = 0;              // edge probability of the ambient instance

    static Params make(Profile prof, int r, int n, double p) {
        if (r < 3 || r > kMaxUniformity) throw std::invalid_argument("r out of range");
        if (n < r) throw std::invalid_argument("n < r");
        if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("p out of (0,1]");
        Params pa;
        pa.profile = prof;
        pa.r = r;
        pa.p = p;
        pa.n_log = std::log(static_cast<double>(n));
        pa.log_xi_prime = -r * std::log(100.0);
        pa.xi_prime = std::exp(pa.log_xi_prime);
        pa.log_xi = r * pa.log_xi_prime - std::log(2.0 * r) - 20.0 * r * std::log(2.0);
        pa.xi = std::exp(pa.log_xi);
        pa.delta = std::pow(8.0, r) * pa.xi + pa.xi_prime;
        pa.log_C = 8.0 * r * std::log(10.0);
        pa.C = std::exp(pa.log_C);
        pa.log_c = -r * std::log(10.0) + r * pa.log_xi;
        pa.c = std::exp(pa.log_c);

        pa.Q = q_rule(r, p, pa.n_log, pa.Q_cap);
        if (prof == Profile::Paper) {
            pa.grow = std::max(2, static_cast<int>(std::floor(pa.n_log)));
            pa.t = t_rule_paper(pa.Q, pa.n_log);
        } else {
            pa.grow = 8;
            // t is sized per connect call from the actual part size; this is
            // the default for a pool of Q-scale (criterion-style cells)
            pa.t = 0;
        }
        return pa;
    }

    static int q_rule(int r, double p, double n_log, int cap) {
        double q = std::pow(p, -(r - 1) / 2.0) * n_log;
        return std::max(2, std::min(cap, static_cast<int>(std::ceil(q))));
    }

    static int t_rule_paper(int Q, double n_log) {
        double loglog = std::log(std::max(n_log, 1.5));
        int t = 2 * static_cast<int>(std::ceil(std::log(static_cast<double>(std::max(Q, 2))) / loglog));
        return std::max(2, t);
    }

    // Desk fan depth from the estimated per-expansion growth at a given
    // part size: enough expansion steps that g^(t/2) reaches Q.
    int t_rule_desk(int Q_eff, int part_size) const {
        double g = std::min(static_cast<double>(grow), std::max(1.10, 0.9 * p * part_size));
        int t_est = 2 * static_cast<int>(std::ceil(std::log(static_cast<double>(std::max(Q_eff, 2))) / std::log(g)));
        return std::max(2, std::min(t_cap, t_est));
    }

    // Adaptive part count per fan: keep the expected hits per exposure near
    // gamma so paths neither starve nor explode.
    int parts_per_fan(int pool) const {
        if (profile == Profile::Paper) return 4 * (r - 1);
        int k = static_cast<int>(pool * p / gamma);
        return std::max(1, std::min(4 * (r - 1), k));
    }

    // Reservoir-internal connects use a link-driven leaf target; the
    // default Q would make absorbers quadratically larger than needed.
    int q_link_driven() const {
        double q = std::sqrt(link_target) * std::pow(p, -(r - 1) / 2.0);
        return std::max(4, std::min(Q, static_cast<int>(std::ceil(q))));
    }

    bool is_paper() const { return profile == Profile::Paper; }

    // --- goodness thresholds (comparisons in plain doubles; paper values
    // computed in log space to survive r = 5) ---

    // condition (ii): deg_E({c,b}, S) threshold, k = |c|
    double degE_threshold(int k, double S_size) const {
        if (profile == Profile::Paper) {
            double lg = (r - k - 1) * log_xi + (r - k - 2) * std::log(std::max(S_size, 2.0));
            return std::exp(lg);
        }
        double v = std::pow(desk_xi, r - k - 1) * std::pow(S_size, r - k - 2);
        return slack * std::max(static_cast<double>(degE_floor), v);
    }

    // condition (iii): mult({c,b}) threshold, k = |c|. At k = r-2 the
    // threshold is zero in both profiles: any repeat of a full window would
    // collapse leaf distinctness.
    double mult_threshold(int k, double S_size) const {
        if (k >= r - 2 && profile == Profile::Desk) return 0.0;
        double lg = std::log(static_cast<double>(Q)) - (k + 1) * std::log(std::max(S_size, 2.0)) +
                    (k + 1) * std::log(std::max(n_log, 1.5));
        if (profile == Profile::Paper) return std::exp((r - k - 1) * log_xi + lg);
        double v = std::pow(desk_xi, r - k - 1) * std::exp(lg);
        return slack * std::max(static_cast<double>(mult_floor), v);
    }

    // condition (iv): deg_D({c,b}, S) threshold, k = |c| <= r-3. The
    // k = r-2 case is a direct D-membership test, handled by the caller.
    double degD_threshold(int k, double S_size) const {
        double xp = (profile == Profile::Paper) ? xi_prime : desk_xi_prime;
        double v = std::pow(xp * S_size, r - k - 2);
        if (profile == Profile::Paper) return v;
        return slack * std::max(1.0, v);
    }

    // danger threshold: a tuple is dangerous when blocked for at least this
    // many leaves of the first fan
    double danger_threshold() const {
        double xp = (profile == Profile::Paper) ? xi_prime : desk_xi_prime;
        return std::max(1.0, xp * static_cast<double>(Q));
    }

    double e_density_cap(double S_size) const {
        if (profile == Profile::Paper)
            return std::exp(log_c + (r - 1) * std::log(std::max(S_size, 2.0)));
        return desk_c * std::pow(S_size, r - 1);
    }

    // Paper profile must satisfy the published constants exactly.
    bool paper_constants_consistent() const {
        auto close = [](double a, double b) {
            return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
        };
        return close(xi_prime, std::pow(100.0, -r)) &&
               close(log_xi, r * log_xi_prime - std::log(2.0 * r) - 20.0 * r * std::log(2.0)) &&
               close(delta, std::pow(8.0, r) * xi + xi_prime) &&
               close(log_C, 8.0 * r * std::log(10.0)) &&
               close(log_c, -r * std::log(10.0) + r * log_xi);
    }

    void apply_override(const std::string& key, double value) {
        if (key == "grow") grow = static_cast<int>(value);
        else if (key == "Q") Q = static_cast<int>(value);
        else if (key == "Qcap") Q_cap = static_cast<int>(value);
        else if (key == "t") t = static_cast<int>(value);
        else if (key == "tcap") t_cap = static_cast<int>(value);
        else if (key == "gamma") gamma = value;
        else if (key == "xi") desk_xi = value;
        else if (key == "xiprime") desk_xi_prime = value;
        else if (key == "slack") slack = value;
        else if (key == "multfloor") mult_floor = static_cast<int>(value);
        else if (key == "degEfloor") degE_floor = static_cast<int>(value);
        else if (key == "restarts") fan_restarts = static_cast<int>(value);
        else if (key == "deskc") desk_c = value;
        else if (key == "linktarget") link_target = value;
        else if (key == "growthK") growth_cap_K = value;
        else if (key == "sfrac") s_frac = value;
        else if (key == "kappa") kappa = value;
        else if (key == "lbudget") L_budget_frac = value;
        else if (key == "stepcap") step_cap_factor = static_cast<int>(value);
        else throw std::invalid_argument("unknown parameter override: " + key);
    }
};

}  // namespace tighthc
