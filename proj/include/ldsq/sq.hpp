#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/ldlr.hpp"
#include "ldsq/measures.hpp"

namespace ldsq {

// ============================================================================
// Queries
// ============================================================================

// phi: states -> [0,1], tabulated over the null's state space.
struct TabulatedQuery {
    std::vector<double> values;
};

// phi_u(x) = (1 + x^u) / 2 over the uniform hypercube.
struct ParityQuery {
    std::uint64_t mask = 0;
};

// phi(x) = 1{<w, x> >= c} for Gaussian backends.
struct GaussianThresholdQuery {
    std::vector<double> w;
    double c = 0.0;
};

using Query = std::variant<TabulatedQuery, ParityQuery, GaussianThresholdQuery>;

struct NullHypothesis {};
using Hypothesis = std::variant<NullHypothesis, Alternate>;

inline void validate_query(const Query& q) {
    if (std::holds_alternative<TabulatedQuery>(q))
        for (double v : std::get<TabulatedQuery>(q).values)
            require(v >= 0.0 && v <= 1.0, "tabulated query values must lie in [0,1]");
}

// Exact expectation of a query under the null or under one alternate.
inline double true_expectation(const TestingProblem& pr, const Hypothesis& hyp, const Query& q) {
    validate_query(q);
    const bool is_null = std::holds_alternative<NullHypothesis>(hyp);
    if (std::holds_alternative<GaussianThresholdQuery>(q)) {
        const auto& gq = std::get<GaussianThresholdQuery>(q);
        require(std::holds_alternative<GaussianNull>(pr.null), "query/backend mismatch");
        double norm = std::sqrt(compensated_dot(gq.w, gq.w));
        require(norm > 0.0, "threshold query needs a nonzero direction");
        if (is_null) return normal_cdf(-gq.c / norm);
        const auto& alt = std::get<Alternate>(hyp);
        require(std::holds_alternative<MeanShiftAlternate>(alt), "query/backend mismatch");
        const auto& mu = std::get<MeanShiftAlternate>(alt).mean;
        return normal_cdf((compensated_dot(gq.w, mu) - gq.c) / norm);
    }
    require(std::holds_alternative<ProductNull>(pr.null), "query/backend mismatch");
    const auto& null = std::get<ProductNull>(pr.null);
    if (std::holds_alternative<ParityQuery>(q)) {
        const auto& pq = std::get<ParityQuery>(q);
        require(null.binary_symmetric(), "parity query needs the uniform hypercube null");
        if (pq.mask == 0) return 1.0;
        if (is_null) return 0.5;
        const auto& alt = std::get<Alternate>(hyp);
        // E phi_u = (1 + E chi_u) / 2
        if (std::holds_alternative<ParityAlternate>(alt)) {
            const auto& pa = std::get<ParityAlternate>(alt);
            return 0.5 * (1.0 + (pa.mask == pq.mask ? pa.amplitude : 0.0));
        }
        if (std::holds_alternative<ProductAlternate>(alt)) {
            const auto& pa = std::get<ProductAlternate>(alt);
            double chi = 1.0;
            for (int i = 0; i < null.dimension(); ++i)
                if (pq.mask >> i & 1ULL) {
                    const auto& p = pa.coord_probs[std::size_t(i)];
                    chi *= p[1] - p[0];  // E x_i on {-1, +1}
                }
            return 0.5 * (1.0 + chi);
        }
        if (std::holds_alternative<DenseAlternate>(alt)) {
            const auto& d = std::get<DenseAlternate>(alt);
            CompensatedSum s;
            for (std::uint64_t x = 0; x < null.num_states(); ++x) {
                int par = 1;
                std::uint64_t mm = pq.mask, xx = x;
                for (; mm != 0; mm >>= 1, xx >>= 1)
                    if ((mm & 1ULL) && (xx & 1ULL) == 0ULL) par = -par;
                s.add(d.probs[x] * par);
            }
            return 0.5 * (1.0 + s.value());
        }
        throw std::invalid_argument("query/backend mismatch");
    }
    const auto& tq = std::get<TabulatedQuery>(q);
    require(tq.values.size() == null.num_states(), "tabulated query size mismatch");
    CompensatedSum s;
    if (is_null) {
        for (std::uint64_t x = 0; x < null.num_states(); ++x) s.add(null.state_prob(x) * tq.values[x]);
    } else {
        auto table = dense_table(null, std::get<Alternate>(hyp));
        for (std::uint64_t x = 0; x < null.num_states(); ++x) s.add(table[x] * tq.values[x]);
    }
    return s.value();
}

// ============================================================================
// VSTAT oracle
// ============================================================================

enum class Adversary { Honest, TowardNull, Custom };

struct SqTranscriptEntry {
    std::size_t query_index = 0;
    double true_value = 0.0;
    double tolerance = 0.0;
    double returned = 0.0;
    std::string adversary;
};

struct SqTranscript {
    std::vector<SqTranscriptEntry> entries;
};

// custom adversary hook: (true p, tolerance, E_null phi, transcript) -> answer
using CustomAdversary = std::function<double(double, double, double, const SqTranscript&)>;

struct SqAnswer {
    double value = 0.0;
    double tolerance = 0.0;
    double true_value = 0.0;
};

inline double vstat_tolerance(double p, double m_oracle) {
    return std::max(1.0 / m_oracle, std::sqrt(p * (1.0 - p) / m_oracle));
}

inline SqAnswer vstat_answer(const TestingProblem& pr, const Hypothesis& hyp, const Query& q,
                             double m_oracle, Adversary adversary, SqTranscript* transcript = nullptr,
                             const CustomAdversary& custom = nullptr) {
    require(m_oracle > 0.0, "vstat_answer: oracle parameter must be positive");
    SqAnswer ans;
    ans.true_value = true_expectation(pr, hyp, q);
    ans.tolerance = vstat_tolerance(ans.true_value, m_oracle);
    const char* tag = "honest";
    switch (adversary) {
        case Adversary::Honest:
            ans.value = ans.true_value;
            break;
        case Adversary::TowardNull: {
            const double p0 = true_expectation(pr, NullHypothesis{}, q);
            ans.value = std::clamp(p0, ans.true_value - ans.tolerance, ans.true_value + ans.tolerance);
            tag = "toward_null";
            break;
        }
        case Adversary::Custom: {
            require(bool(custom), "custom adversary hook missing");
            const double p0 = true_expectation(pr, NullHypothesis{}, q);
            static const SqTranscript empty;
            ans.value = custom(ans.true_value, ans.tolerance, p0, transcript ? *transcript : empty);
            require(std::abs(ans.value - ans.true_value) <= ans.tolerance + 1e-12,
                    "custom adversary returned an out-of-tolerance answer");
            tag = "custom";
            break;
        }
    }
    if (transcript) {
        transcript->entries.push_back(
            {transcript->entries.size(), ans.true_value, ans.tolerance, ans.value, tag});
        // transcript invariant: every answer within tolerance of the truth
        require(std::abs(ans.value - ans.true_value) <= ans.tolerance + 1e-12,
                "transcript invariant violated");
    }
    return ans;
}

// ============================================================================
// SQ algorithm execution
// ============================================================================

struct PolicyVerdict {
    bool alternate = false;
};
using PolicyStep = std::variant<Query, PolicyVerdict>;

// Deterministic (or seeded via captured state) map from transcript prefix to
// the next query or a verdict.
struct SqPolicy {
    std::string name;
    std::function<PolicyStep(const SqTranscript&)> next;
};

// Queries every phi_u in the family and reports "alternate" iff some answer
// clears 1/2 + threshold.
inline SqPolicy sparse_parity_policy(std::vector<std::uint64_t> masks, double threshold) {
    SqPolicy p;
    p.name = "sparse-parity";
    p.next = [masks = std::move(masks), threshold](const SqTranscript& t) -> PolicyStep {
        if (t.entries.size() < masks.size()) return Query(ParityQuery{masks[t.entries.size()]});
        for (const auto& e : t.entries)
            if (e.returned >= 0.5 + threshold) return PolicyVerdict{true};
        return PolicyVerdict{false};
    };
    return p;
}

// No queries: always answers "null" (cannot distinguish anything).
inline SqPolicy empty_policy() {
    return {"empty", [](const SqTranscript&) -> PolicyStep { return PolicyVerdict{false}; }};
}

struct SqRunReport {
    double type1_error = 0.0;     // P(verdict = alternate | null)
    double type2_error = 0.0;     // P(verdict = null | alternate)
    double success = 0.0;         // 1 - (type1 + type2)/2
    std::uint64_t trials = 0;
    std::vector<SqTranscript> transcripts;  // kept only when requested
};

inline SqRunReport run_sq_algorithm(const SqPolicy& policy, const TestingProblem& pr, double m_oracle,
                                    Adversary adversary, std::uint64_t trials, std::uint64_t seed,
                                    std::uint64_t query_cap = 4096, bool keep_transcripts = false,
                                    const CustomAdversary& custom = nullptr) {
    require(trials > 0, "run_sq_algorithm: need at least one trial");
    SqRunReport rep;
    rep.trials = trials;
    std::uint64_t false_alarms = 0, misses = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        RngStream rng(derive_seed(seed, t));
        Alternate u = detail::draw_alternate(pr.prior, rng);
        for (int branch = 0; branch < 2; ++branch) {
            Hypothesis hyp = branch ? Hypothesis(u) : Hypothesis(NullHypothesis{});
            SqTranscript transcript;
            bool verdict = false;
            for (std::uint64_t steps = 0;; ++steps) {
                require(steps <= query_cap, "policy exceeded the query cap");
                PolicyStep step = policy.next(transcript);
                if (std::holds_alternative<PolicyVerdict>(step)) {
                    verdict = std::get<PolicyVerdict>(step).alternate;
                    break;
                }
                vstat_answer(pr, hyp, std::get<Query>(step), m_oracle, adversary, &transcript, custom);
            }
            if (branch == 0 && verdict) ++false_alarms;
            if (branch == 1 && !verdict) ++misses;
            if (keep_transcripts && rep.transcripts.size() < 64) rep.transcripts.push_back(transcript);
        }
    }
    rep.type1_error = double(false_alarms) / double(trials);
    rep.type2_error = double(misses) / double(trials);
    rep.success = 1.0 - 0.5 * (rep.type1_error + rep.type2_error);
    return rep;
}

// ============================================================================
// Distinguisher scores
// ============================================================================

struct DistinguisherScore {
    double advantage = 0.0;
    double null_std = 0.0;
    double beta = 0.0;
    bool beta_unbounded = false;  // zero null variance with nonzero advantage
    bool good = false;            // beta > 1
};

namespace detail {

inline DistinguisherScore score_from_moments(double null_mean, double null_second, double alt_mean) {
    DistinguisherScore s;
    s.advantage = std::abs(alt_mean - null_mean);
    s.null_std = std::sqrt(std::max(0.0, null_second - null_mean * null_mean));
    if (s.null_std == 0.0) {
        if (s.advantage > 0.0) {
            s.beta_unbounded = true;
            s.beta = std::numeric_limits<double>::infinity();
        }
    } else {
        s.beta = s.advantage / s.null_std;
    }
    s.good = s.beta > 1.0;
    return s;
}

}  // namespace detail

// Exact moments of a tabulated m-sample function on (states)^m.
inline DistinguisherScore distinguisher_score(const std::vector<double>& p_values,
                                              const TestingProblem& pr, int m) {
    require(std::holds_alternative<ProductNull>(pr.null), "tabulated scores need a finite backend");
    require(pr.prior.explicit_list(), "tabulated scores need an explicit prior");
    const auto& null = std::get<ProductNull>(pr.null);
    const std::uint64_t states = null.num_states();
    std::uint64_t total = 1;
    for (int s = 0; s < m; ++s) {
        total *= states;
        require(total <= (1ULL << 22), "state-space cap exceeded");
    }
    require(p_values.size() == total, "tabulated function size mismatch");
    std::vector<double> null_probs(states);
    for (std::uint64_t x = 0; x < states; ++x) null_probs[x] = null.state_prob(x);
    std::vector<std::vector<double>> alt_probs;
    for (const auto& alt : pr.prior.alternates) alt_probs.push_back(dense_table(null, alt));

    CompensatedSum null_mean, null_second, alt_mean;
    for (std::uint64_t x = 0; x < total; ++x) {
        double pn = 1.0;
        std::uint64_t s = x;
        for (int j = 0; j < m; ++j) {
            pn *= null_probs[s % states];
            s /= states;
        }
        null_mean.add(pn * p_values[x]);
        null_second.add(pn * p_values[x] * p_values[x]);
        double pa = 0.0;
        for (std::size_t u = 0; u < alt_probs.size(); ++u) {
            double pu = pr.prior.weights[u];
            s = x;
            for (int j = 0; j < m; ++j) {
                pu *= alt_probs[u][s % states];
                s /= states;
            }
            pa += pu;
        }
        alt_mean.add(pa * p_values[x]);
    }
    return detail::score_from_moments(null_mean.value(), null_second.value(), alt_mean.value());
}

// Samplewise character polynomial p = sum_T c_T prod_{(i, mask) in T}
// chi_mask(x_i) over a binary product null; terms must be distinct basis
// elements.
struct CharPolyTerm {
    std::vector<std::pair<int, std::uint64_t>> factors;  // (sample index, mask), masks nonzero
    double coeff = 0.0;
};

inline DistinguisherScore distinguisher_score(const std::vector<CharPolyTerm>& terms,
                                              const TestingProblem& pr, int m) {
    require(pr.prior.explicit_list(), "character scores need an explicit prior");
    CorrelationEngine eng(pr);
    double null_mean = 0.0;
    CompensatedSum null_second;
    CompensatedSum alt_mean;
    // per-alternate coefficient evaluator E_{D_u} chi_mask
    auto coef = [&](const Alternate& alt, std::uint64_t mask) -> double {
        if (std::holds_alternative<ParityAlternate>(alt)) {
            const auto& pa = std::get<ParityAlternate>(alt);
            return pa.mask == mask ? pa.amplitude : 0.0;
        }
        if (std::holds_alternative<ProductAlternate>(alt)) {
            auto view = eng.view(alt);
            double c = 1.0;
            for (std::size_t i = 0; i < view.prod_coeff.size(); ++i)
                if (mask >> i & 1ULL) c *= view.prod_coeff[i][0];
            return c;
        }
        throw std::invalid_argument("character scores support parity/product alternates");
    };
    for (const auto& t : terms) {
        for (const auto& [i, mask] : t.factors) {
            require(i >= 0 && i < m, "character term references a sample out of range");
            require(mask != 0, "character factors must be nonconstant");
        }
        if (t.factors.empty())
            null_mean += t.coeff;
        else
            null_second.add(t.coeff * t.coeff);
        CompensatedSum term_alt;
        for (std::size_t u = 0; u < pr.prior.alternates.size(); ++u) {
            double v = pr.prior.weights[u] * t.coeff;
            for (const auto& [i, mask] : t.factors) v *= coef(pr.prior.alternates[u], mask);
            term_alt.add(v);
        }
        alt_mean.add(term_alt.value());
    }
    return detail::score_from_moments(null_mean, null_second.value() + null_mean * null_mean,
                                      alt_mean.value());
}

// ============================================================================
// The symmetric-product polynomial f_Psi built from statistical queries
//
//   f_Psi(x_1..x_m) = sum_t sqrt(1/C(m,k)) sum_{i_1<...<i_k} prod_l
//                     psibar_t(x_{i_l}),   psibar = (psi - p) / sqrt(p)
// ============================================================================

struct FPsi {
    std::vector<Query> queries;
    std::vector<double> p0;  // E_null psi_t, each in (0, 1/2]
    long long m = 0;
    int k = 0;
};

struct FPsiReport {
    double null_mean = 0.0;           // E_null f (zero by construction)
    double null_second_moment = 0.0;  // E_null f^2 <= q^2
    int query_count = 0;
    double tau = 0.0;
    double eta = 0.0;                  // P_u[no query beats the VSTAT(1/tau) tolerance]
    double alt_expectation = 0.0;      // E_u E_{D_u^m} f
    double advantage_lower_bound = 0.0;  // (1-eta) sqrt(C(m,k) (tau/2)^k)
    bool lower_bound_ok = false;
    // the truncation inequality (k even):
    // (ldlr^{2/k} + delta^{2/k} C(m,k)^{1/k})^{k/2} >= (alt / null_std) / 2
    bool trunc_checked = false;
    double trunc_lhs = 0.0;
    double trunc_rhs = 0.0;
    bool trunc_ok = true;
};

inline FPsi build_f_psi(std::vector<Query> queries, const TestingProblem& pr, long long m, int k) {
    require(!queries.empty(), "build_f_psi: need at least one query");
    require(k >= 1 && m >= k, "build_f_psi: need 1 <= k <= m");
    FPsi f;
    for (const auto& q : queries) {
        const double p = true_expectation(pr, NullHypothesis{}, q);
        require(p > 0.0 && p <= 0.5,
                "build_f_psi: query must have null mean in (0, 1/2]; replace psi by its complement");
        f.p0.push_back(p);
    }
    f.queries = std::move(queries);
    f.m = m;
    f.k = k;
    return f;
}

namespace detail {

// E_null psi_s psi_t for the supported query kinds.
inline double null_pair_expectation(const TestingProblem& pr, const Query& a, const Query& b) {
    if (std::holds_alternative<ParityQuery>(a) && std::holds_alternative<ParityQuery>(b)) {
        const auto ma = std::get<ParityQuery>(a).mask;
        const auto mb = std::get<ParityQuery>(b).mask;
        // E phi_a phi_b = (1 + 1{a = b}) / 4 for nonzero distinct masks
        if (ma == 0 || mb == 0) return 0.5;
        return (ma == mb) ? 0.5 : 0.25;
    }
    const auto& null = std::get<ProductNull>(pr.null);
    auto value = [&](const Query& q, std::uint64_t x) -> double {
        if (std::holds_alternative<TabulatedQuery>(q)) return std::get<TabulatedQuery>(q).values[x];
        const auto mask = std::get<ParityQuery>(q).mask;
        int par = 1;
        std::uint64_t mm = mask, xx = x;
        for (; mm != 0; mm >>= 1, xx >>= 1)
            if ((mm & 1ULL) && (xx & 1ULL) == 0ULL) par = -par;
        return 0.5 * (1.0 + par);
    };
    CompensatedSum s;
    for (std::uint64_t x = 0; x < null.num_states(); ++x)
        s.add(null.state_prob(x) * value(a, x) * value(b, x));
    return s.value();
}

}  // namespace detail

inline FPsiReport verify_f_psi(const FPsi& f, const TestingProblem& pr, double tau, Degree d) {
    require(pr.prior.explicit_list(), "verify_f_psi: explicit prior required");
    require(tau > 0.0 && tau <= 1.0, "verify_f_psi: tau must lie in (0,1]");
    FPsiReport rep;
    rep.query_count = int(f.queries.size());
    rep.tau = tau;
    const double cmk = binomial(std::uint64_t(f.m), std::uint64_t(f.k));

    // null moments via the independence factorization
    CompensatedSum null_mean, null_second;
    for (std::size_t s = 0; s < f.queries.size(); ++s) {
        const double ps = f.p0[s];
        const double centered = 0.0;  // E psibar = (p - p)/sqrt(p)
        null_mean.add(std::sqrt(cmk) * std::pow(centered, f.k));
        for (std::size_t t = 0; t < f.queries.size(); ++t) {
            const double pt = f.p0[t];
            const double cross =
                (detail::null_pair_expectation(pr, f.queries[s], f.queries[t]) - ps * pt) /
                std::sqrt(ps * pt);
            null_second.add(std::pow(cross, f.k));
        }
    }
    rep.null_mean = null_mean.value();
    rep.null_second_moment = null_second.value();

    // alternate expectation and the VSTAT success probability
    CompensatedSum alt;
    double eta = 0.0;
    for (std::size_t u = 0; u < pr.prior.alternates.size(); ++u) {
        const Hypothesis hyp = pr.prior.alternates[u];
        bool beats = false;
        double contrib = 0.0;
        for (std::size_t t = 0; t < f.queries.size(); ++t) {
            const double pu = true_expectation(pr, hyp, f.queries[t]);
            const double pt = f.p0[t];
            const double centered = (pu - pt) / std::sqrt(pt);
            contrib += std::pow(centered, f.k);
            if (std::abs(pu - pt) >= std::max(tau, std::sqrt(tau * pt * (1.0 - pt)))) beats = true;
        }
        alt.add(pr.prior.weights[u] * std::sqrt(cmk) * contrib);
        if (!beats) eta += pr.prior.weights[u];
    }
    rep.alt_expectation = alt.value();
    rep.eta = eta;
    rep.advantage_lower_bound = (1.0 - eta) * std::sqrt(cmk * std::pow(tau / 2.0, f.k));
    rep.lower_bound_ok = rep.alt_expectation >= rep.advantage_lower_bound - 1e-12;

    // truncation inequality against the (d,k)-LDLR and high-degree norm
    if (f.k % 2 == 0) {
        rep.trunc_checked = true;
        auto sp = exact_spectrum(pr);
        const double ldlr_sq = ldlr_norm(sp, f.m, SamplewiseDegree(d, f.k)).squared_norm;
        const double delta_sq = high_degree_norm(sp, d, f.k);
        rep.trunc_lhs =
            std::pow(std::pow(std::max(ldlr_sq, 0.0), 1.0 / f.k) +
                         std::pow(std::max(delta_sq, 0.0), 1.0 / f.k) * std::pow(cmk, 1.0 / f.k),
                     double(f.k) / 2.0);
        const double null_std = std::sqrt(std::max(rep.null_second_moment, 1e-300));
        rep.trunc_rhs = 0.5 * rep.alt_expectation / null_std;
        rep.trunc_ok = rep.trunc_lhs >= rep.trunc_rhs - 1e-12;
    }
    return rep;
}

}  // namespace ldsq
