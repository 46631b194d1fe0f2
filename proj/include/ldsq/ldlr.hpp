#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/measures.hpp"

namespace ldsq {

// ============================================================================
// LDLR norms via the binomial identity
//
//   <(Dbar_u^{(x)m})^{<=d,k}, (Dbar_v^{(x)m})^{<=d,k}> - 1
//       = sum_{t=1}^{k} C(m,t) (<Dbar_u^{<=d}, Dbar_v^{<=d}> - 1)^t
// ============================================================================

struct LdlrReport {
    long long m = 0;
    SamplewiseDegree degree;
    double squared_norm = 0.0;
    std::vector<double> per_t;  // contribution of t = 1..k
    std::string backend;        // "identity" | "brute-force" | "monte-carlo"
    double stderr_value = 0.0;  // 0 for exact backends
    std::uint64_t seed = 0;
};

inline LdlrReport ldlr_norm(const PairSpectrum& sp, long long m, SamplewiseDegree deg) {
    const int k = deg.active_samples;
    require(m >= k, "ldlr_norm: need m >= k");
    LdlrReport rep;
    rep.m = m;
    rep.degree = deg;
    rep.backend = "identity";
    rep.per_t.assign(std::size_t(k), 0.0);
    std::vector<CompensatedSum> acc{std::size_t(k)};
    for (std::size_t i = 0; i < sp.count(); ++i) {
        const double w = sp.weight(i);
        const double x = sp.correlation(i, deg.per_sample) - 1.0;
        double p = 1.0;
        for (int t = 1; t <= k; ++t) {
            p *= x;
            acc[std::size_t(t - 1)].add(w * p);
        }
    }
    CompensatedSum total;
    for (int t = 1; t <= k; ++t) {
        double c = binomial(std::uint64_t(m), std::uint64_t(t)) * acc[std::size_t(t - 1)].value();
        rep.per_t[std::size_t(t - 1)] = c;
        total.add(c);
    }
    rep.squared_norm = total.value();
    return rep;
}

inline LdlrReport ldlr_norm(const TestingProblem& pr, long long m, SamplewiseDegree deg) {
    return ldlr_norm(exact_spectrum(pr), m, deg);
}

// Monte-Carlo estimate over sampled prior pairs, with standard error of the
// per-pair statistic sum_t C(m,t) x^t.
inline LdlrReport ldlr_norm_mc(const TestingProblem& pr, long long m, SamplewiseDegree deg,
                               std::uint64_t budget, std::uint64_t seed) {
    const int k = deg.active_samples;
    require(m >= k, "ldlr_norm: need m >= k");
    require(budget > 1, "ldlr_norm_mc: need budget > 1");
    CorrelationEngine eng(pr);
    std::vector<double> binom(std::size_t(k) + 1);
    for (int t = 1; t <= k; ++t) binom[std::size_t(t)] = binomial(std::uint64_t(m), std::uint64_t(t));

    LdlrReport rep;
    rep.m = m;
    rep.degree = deg;
    rep.backend = "monte-carlo";
    rep.seed = seed;
    rep.per_t.assign(std::size_t(k), 0.0);

    CompensatedSum sum, sumsq;
    std::vector<CompensatedSum> per_t{std::size_t(k)};
    const std::uint64_t chunk = 1024;
    for (std::uint64_t c = 0, n = 0; n < budget; ++c) {
        RngStream rng(derive_seed(seed, c));
        for (std::uint64_t i = 0; i < chunk && n < budget; ++i, ++n) {
            Alternate u = detail::draw_alternate(pr.prior, rng);
            Alternate v = detail::draw_alternate(pr.prior, rng);
            const double x = eng.correlation(u, v, deg.per_sample) - 1.0;
            double p = 1.0, y = 0.0;
            for (int t = 1; t <= k; ++t) {
                p *= x;
                const double c_t = binom[std::size_t(t)] * p;
                per_t[std::size_t(t - 1)].add(c_t);
                y += c_t;
            }
            sum.add(y);
            sumsq.add(y * y);
        }
    }
    const double n = double(budget);
    rep.squared_norm = sum.value() / n;
    for (int t = 0; t < k; ++t) rep.per_t[std::size_t(t)] = per_t[std::size_t(t)].value() / n;
    const double var = std::max(0.0, (sumsq.value() - n * rep.squared_norm * rep.squared_norm) / (n - 1.0));
    rep.stderr_value = std::sqrt(var / n);
    return rep;
}

// ============================================================================
// k-sample likelihood-ratio norms
// ============================================================================

struct KSampleLr {
    double uncentered = 0.0;                // E <Dbar_u, Dbar_v>^k
    std::optional<double> centered;         // E (<Dbar_u, Dbar_v> - 1)^k, k even
};

inline KSampleLr k_sample_lr_norm(const PairSpectrum& sp, int k) {
    require(k >= 1, "k_sample_lr_norm: need k >= 1");
    CompensatedSum unc, cen;
    for (std::size_t i = 0; i < sp.count(); ++i) {
        const double w = sp.weight(i);
        const double c = sp.correlation(i);
        unc.add(w * std::pow(c, k));
        if (k % 2 == 0) cen.add(w * std::pow(c - 1.0, k));
    }
    KSampleLr r;
    r.uncentered = unc.value();
    if (k % 2 == 0) r.centered = cen.value();
    return r;
}

inline KSampleLr k_sample_lr_norm(const TestingProblem& pr, int k) {
    return k_sample_lr_norm(exact_spectrum(pr), k);
}

// || E_u (Dbar_u^{>d})^{(x)k} ||^2 via the orthogonality
// <Dbar_u^{>d}, Dbar_v^{>d}> = <Dbar_u, Dbar_v> - <Dbar_u^{<=d}, Dbar_v^{<=d}>.
inline double high_degree_norm(const PairSpectrum& sp, Degree d, int k) {
    require(k % 2 == 0, "high_degree_norm: odd k rejected");
    CompensatedSum acc;
    for (std::size_t i = 0; i < sp.count(); ++i) {
        const double hi = sp.correlation(i) - sp.correlation(i, d);
        acc.add(sp.weight(i) * std::pow(hi, k));
    }
    return acc.value();
}

inline double high_degree_norm(const TestingProblem& pr, Degree d, int k) {
    return high_degree_norm(exact_spectrum(pr), d, k);
}

// ============================================================================
// Inequality checkers (Hoelder split, samplewise-LDLR boosting)
// ============================================================================

struct HolderSplitReport {
    double full = 0.0;       // ||E (Dbar - 1)^{(x)k}||^{2/k}
    double low = 0.0;        // ||E (Dbar^{<=d} - 1)^{(x)k}||^{2/k}
    double high = 0.0;       // ||E (Dbar^{>d})^{(x)k}||^{2/k}
    double margin = 0.0;     // low + high - full
};

inline HolderSplitReport holder_split_check(const PairSpectrum& sp, Degree d, int k) {
    require(k % 2 == 0, "holder_split_check: k must be even");
    CompensatedSum full, low, high;
    for (std::size_t i = 0; i < sp.count(); ++i) {
        const double w = sp.weight(i);
        const double c = sp.correlation(i);
        const double cl = sp.correlation(i, d);
        full.add(w * std::pow(c - 1.0, k));
        low.add(w * std::pow(cl - 1.0, k));
        high.add(w * std::pow(c - cl, k));
    }
    HolderSplitReport r;
    r.full = std::pow(std::max(0.0, full.value()), 1.0 / k);
    r.low = std::pow(std::max(0.0, low.value()), 1.0 / k);
    r.high = std::pow(std::max(0.0, high.value()), 1.0 / k);
    r.margin = r.low + r.high - r.full;
    return r;
}

struct BoostingReport {
    double lhs = 0.0;     // ||E (Dbar^{<=d} - 1)^{(x)k}||^2
    double rhs = 0.0;     // ldlr^2 / C(m,k)
    double margin = 0.0;  // rhs - lhs
};

inline BoostingReport boosting_bound_check(const PairSpectrum& sp, long long m, Degree d, int k) {
    require(k % 2 == 0, "boosting_bound_check: k must be even");
    require(m >= k, "boosting_bound_check: need m >= k");
    CompensatedSum lhs;
    for (std::size_t i = 0; i < sp.count(); ++i)
        lhs.add(sp.weight(i) * std::pow(sp.correlation(i, d) - 1.0, k));
    BoostingReport r;
    r.lhs = lhs.value();
    r.rhs = ldlr_norm(sp, m, SamplewiseDegree(d, k)).squared_norm /
            binomial(std::uint64_t(m), std::uint64_t(k));
    r.margin = r.rhs - r.lhs;
    return r;
}

// ============================================================================
// Brute-force projection oracle
//
// Tabulates E_u Dbar_u^{(x)m} - 1 on the full m-sample state space, expands it
// in the orthonormal product character basis (built by Gram-Schmidt on the
// per-coordinate monomial ladder, re-orthogonalized, tolerance 1e-12) and sums
// squared coefficients over the samplewise-degree-(d,k) index set. Independent
// of the binomial-identity route above.
// ============================================================================

inline double brute_force_ldlr(const TestingProblem& pr, long long m, SamplewiseDegree deg) {
    require(std::holds_alternative<ProductNull>(pr.null), "brute_force_ldlr: finite backend only");
    require(pr.prior.explicit_list(), "brute_force_ldlr: explicit prior required");
    const auto& null = std::get<ProductNull>(pr.null);
    const int n_coords = null.dimension();
    const std::uint64_t states = null.num_states();

    double total_f = std::pow(double(states), double(m));
    require(total_f <= double(dense_state_cap()),
            "state-space cap exceeded (|Omega|^(N*m) above the configured cap)");
    std::uint64_t total = 1;
    for (long long s = 0; s < m; ++s) total *= states;

    std::vector<std::vector<double>> tables;
    for (const auto& alt : pr.prior.alternates) tables.push_back(dense_table(null, alt));

    // pi^{(x)m} * (E_u prod_s Dbar_u(x_s)) = E_u prod_s D_u(x_s); expanding
    // this in the orthonormal basis gives the coefficients of E_u Dbar^{(x)m}
    std::vector<double> f(total, 0.0);
    for (std::uint64_t x = 0; x < total; ++x) {
        CompensatedSum acc;
        for (std::size_t u = 0; u < tables.size(); ++u) {
            double p = pr.prior.weights[u];
            std::uint64_t s = x;
            for (long long j = 0; j < m; ++j) {
                p *= tables[u][s % states];
                s /= states;
            }
            acc.add(p);
        }
        f[x] = acc.value();
    }

    // expand in the m-fold product basis
    std::vector<CoordinateMarginal> folded;
    for (long long s = 0; s < m; ++s)
        for (int i = 0; i < n_coords; ++i) folded.push_back(null.coord(i));
    ProductNull mfold(folded);
    CharacterBasis basis = character_basis(mfold);
    detail::axis_transform(f, mfold, basis);

    // sum squared coefficients over per-sample degree <= d, 1 <= active <= k
    const Degree d = deg.per_sample;
    const int k = deg.active_samples;
    CompensatedSum norm2;
    std::vector<int> digits;
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        mfold.decode(idx, digits);
        int active = 0;
        bool ok = true;
        for (long long s = 0; s < m && ok; ++s) {
            int ds = 0;
            for (int i = 0; i < n_coords; ++i) ds += digits[std::size_t(s * n_coords + i)];
            if (ds > 0) {
                ++active;
                if (!d.keeps(ds)) ok = false;
            }
        }
        if (ok && active >= 1 && active <= k) norm2.add(f[idx] * f[idx]);
    }
    return norm2.value();
}

// ============================================================================
// Elementary symmetric polynomials
// ============================================================================

// e_t(x) by the standard DP recurrence; stable to ~1e-10 relative for |x_i|<=1.
inline double elementary_symmetric(const std::vector<double>& x, int t) {
    const int n = int(x.size());
    require(t >= 0 && t <= n, "elementary_symmetric: order out of range");
    if (t == 0) return 1.0;
    std::vector<double> e(std::size_t(t) + 1, 0.0);
    e[0] = 1.0;
    for (int i = 0; i < n; ++i) {
        for (int j = std::min(t, i + 1); j >= 1; --j)
            e[std::size_t(j)] += x[std::size_t(i)] * e[std::size_t(j - 1)];
    }
    return e[std::size_t(t)];
}

// flat record for CSV output: problem-id, m, d, k, value, stderr (empty for
// exact), backend, seed
inline std::vector<std::string> csv_row(const LdlrReport& rep, const std::string& problem_id) {
    char value[40], se[40];
    std::snprintf(value, sizeof(value), "%.17g", rep.squared_norm);
    std::string stderr_cell;
    if (rep.stderr_value > 0.0) {
        std::snprintf(se, sizeof(se), "%.17g", rep.stderr_value);
        stderr_cell = se;
    }
    return {problem_id,
            std::to_string(rep.m),
            rep.degree.per_sample.str(),
            std::to_string(rep.degree.active_samples),
            value,
            stderr_cell,
            rep.backend,
            std::to_string(rep.seed)};
}

// All of e_0..e_t at once.
inline std::vector<double> elementary_symmetric_all(const std::vector<double>& x, int t) {
    const int n = int(x.size());
    require(t >= 0, "elementary_symmetric: order out of range");
    std::vector<double> e(std::size_t(t) + 1, 0.0);
    e[0] = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::min(t, i + 1); j >= 1; --j)
            e[std::size_t(j)] += x[std::size_t(i)] * e[std::size_t(j - 1)];
    return e;
}

}  // namespace ldsq
