#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/ldlr.hpp"
#include "ldsq/measures.hpp"
#include "ldsq/rng.hpp"

namespace ldsq {

// ============================================================================
// Tail conditional expectation
//
// sup over events A with Pr(A) >= alpha of E[|X| | A]. For weighted atoms the
// supremum is realized by the sorted prefix with the boundary atom included
// fractionally (events live on the underlying (u,v) space, which refines the
// value atoms), i.e. the expected-shortfall functional.
// ============================================================================

class SortedAtoms {
  public:
    explicit SortedAtoms(const CorrelationAtoms& atoms) {
        const std::size_t n = atoms.values.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<double> av(n);
        for (std::size_t i = 0; i < n; ++i) av[i] = std::abs(atoms.values[i]);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return av[a] > av[b]; });
        absval_.resize(n);
        cumw_.resize(n);
        cumwv_.resize(n);
        double w = 0.0;
        CompensatedSum wv;
        for (std::size_t r = 0; r < n; ++r) {
            absval_[r] = av[idx[r]];
            w += atoms.weights[idx[r]];
            wv.add(atoms.weights[idx[r]] * av[idx[r]]);
            cumw_[r] = w;
            cumwv_[r] = wv.value();
        }
        total_weight_ = w;
    }

    // alpha = 0 is the limit: the largest |value|.
    double tce(double alpha) const {
        if (absval_.empty()) return 0.0;
        if (alpha <= 0.0) return absval_.front();
        alpha = std::min(alpha, total_weight_);
        std::size_t j = std::size_t(std::lower_bound(cumw_.begin(), cumw_.end(), alpha) - cumw_.begin());
        if (j >= absval_.size()) j = absval_.size() - 1;
        const double before_w = (j == 0) ? 0.0 : cumw_[j - 1];
        const double before_wv = (j == 0) ? 0.0 : cumwv_[j - 1];
        return (before_wv + (alpha - before_w) * absval_[j]) / alpha;
    }

    double mean_abs() const { return cumwv_.empty() ? 0.0 : cumwv_.back(); }
    double max_abs() const { return absval_.empty() ? 0.0 : absval_.front(); }

  private:
    std::vector<double> absval_, cumw_, cumwv_;
    double total_weight_ = 1.0;
};

inline double tail_conditional_expectation(const CorrelationAtoms& atoms, double alpha) {
    require(alpha > 0.0 && alpha <= 1.0 + 1e-12, "tail_conditional_expectation: alpha out of range");
    return SortedAtoms(atoms).tce(alpha);
}

// ============================================================================
// SDA
// ============================================================================

inline constexpr std::uint64_t kSdaCap = 1'000'000'000ULL;

struct SdaReport {
    double m = 0.0;
    std::uint64_t q = 0;
    bool unbounded = false;  // q reached the search cap
    // failing event at q+1 when finite: its probability and conditional mean
    double witness_prob = 0.0;
    double witness_mean = 0.0;
    bool empirical = false;
    std::uint64_t seed = 0;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> bootstrap_interval;
};

namespace detail {

inline std::uint64_t sda_search(const SortedAtoms& sorted, double m, std::uint64_t cap) {
    auto ok = [&](std::uint64_t q) {
        const double qd = double(q);
        return sorted.tce(1.0 / (qd * qd)) <= 1.0 / m;
    };
    if (!ok(1)) return 0;
    if (ok(cap)) return cap;
    std::uint64_t lo = 1, hi = cap - 1;
    while (lo < hi) {
        std::uint64_t mid = lo + (hi - lo + 1) / 2;
        if (ok(mid))
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

}  // namespace detail

inline SdaReport sda(const CorrelationAtoms& atoms, double m, std::uint64_t cap = kSdaCap) {
    require(m > 0.0, "sda: oracle parameter m must be positive");
    SortedAtoms sorted(atoms);
    SdaReport rep;
    rep.m = m;
    rep.empirical = atoms.empirical;
    rep.seed = atoms.seed;
    rep.q = detail::sda_search(sorted, m, cap);
    rep.unbounded = (rep.q == cap);
    if (!rep.unbounded) {
        const double qf = double(rep.q + 1);
        rep.witness_prob = 1.0 / (qf * qf);
        rep.witness_mean = sorted.tce(rep.witness_prob);
    }
    if (atoms.empirical && !atoms.values.empty()) {
        // plug-in estimator: bootstrap percentile interval, 200 resamples
        const int reps = 200;
        std::vector<std::uint64_t> qs(reps);
        const std::size_t n = atoms.values.size();
        for (int r = 0; r < reps; ++r) {
            RngStream rng(derive_seed(atoms.seed ^ 0xb005ULL, std::uint64_t(r)));
            CorrelationAtoms re;
            re.weights.assign(n, 1.0 / double(n));
            re.values.resize(n);
            for (std::size_t i = 0; i < n; ++i) re.values[i] = atoms.values[rng.below(n)];
            qs[std::size_t(r)] = detail::sda_search(SortedAtoms(re), m, cap);
        }
        std::sort(qs.begin(), qs.end());
        rep.bootstrap_interval = {qs[std::size_t(reps * 0.025)], qs[std::size_t(reps * 0.975)]};
    }
    return rep;
}

inline SdaReport sda(const TestingProblem& pr, double m, std::uint64_t cap = kSdaCap) {
    return sda(correlation_atoms(pr, AtomsMode::Exact), m, cap);
}

// flat record for CSV output: problem-id, m, q, witness-prob, witness-mean,
// mode, seed
inline std::vector<std::string> csv_row(const SdaReport& rep, const std::string& problem_id) {
    char m[40], wp[40], wm[40];
    std::snprintf(m, sizeof(m), "%.17g", rep.m);
    std::snprintf(wp, sizeof(wp), "%.17g", rep.witness_prob);
    std::snprintf(wm, sizeof(wm), "%.17g", rep.witness_mean);
    return {problem_id,
            m,
            rep.unbounded ? ">=" + std::to_string(kSdaCap) : std::to_string(rep.q),
            wp,
            wm,
            rep.empirical ? "empirical" : "exact",
            std::to_string(rep.seed)};
}

// ============================================================================
// Product SDA (weaker variant: events are A_u x A_u over single draws)
// ============================================================================

// |<Dbar_i, Dbar_j> - 1| matrix plus prior weights.
struct PairMatrix {
    std::size_t n = 0;
    std::vector<double> w;
    std::vector<double> absx;  // row-major n x n
    double at(std::size_t i, std::size_t j) const { return absx[i * n + j]; }
};

inline PairMatrix pair_matrix(const TestingProblem& pr) {
    require(pr.prior.explicit_list(), "product_sda: sampler prior rejected");
    CorrelationEngine eng(pr);
    PairMatrix pm;
    pm.n = pr.prior.alternates.size();
    pm.w = pr.prior.weights;
    pm.absx.assign(pm.n * pm.n, 0.0);
    std::vector<AlternateView> views;
    views.reserve(pm.n);
    for (const auto& a : pr.prior.alternates) views.push_back(eng.view(a));
    for (std::size_t i = 0; i < pm.n; ++i)
        for (std::size_t j = i; j < pm.n; ++j) {
            double v = std::abs(eng.correlation(views[i], views[j], Degree::unbounded()) - 1.0);
            pm.absx[i * pm.n + j] = v;
            pm.absx[j * pm.n + i] = v;
        }
    return pm;
}

struct ProductSdaReport {
    double m = 0.0;
    std::uint64_t q_lower = 0;  // certified: product-SDA >= q_lower
    std::uint64_t q_upper = 0;  // witnessed: product-SDA <= q_upper
    bool exact = false;         // q_lower == q_upper by exhaustive search
    bool unbounded = false;
};

namespace detail {

// max_{S : w(S) >= beta} E[|X| | S x S] for every beta, by exhaustive subset
// enumeration; returns (weights, means) sorted by weight descending with
// prefix-maxed means.
struct SubsetEnvelope {
    std::vector<double> wts;
    std::vector<double> best_mean;
    double query(double beta) const {
        // largest prefix with weight >= beta; wts sorted descending
        std::size_t lo = 0, hi = wts.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (wts[mid] >= beta)
                lo = mid + 1;
            else
                hi = mid;
        }
        if (lo == 0) return -1.0;  // no admissible subset
        return best_mean[lo - 1];
    }
};

inline SubsetEnvelope subset_envelope(const PairMatrix& pm) {
    const std::size_t n = pm.n;
    require(n <= 20, "exhaustive product-SDA limited to 20 alternates");
    const std::size_t total = std::size_t(1) << n;
    std::vector<double> num(total, 0.0), wsum(total, 0.0);
    std::vector<std::pair<double, double>> rows;  // (weight, mean)
    rows.reserve(total - 1);
    for (std::size_t s = 1; s < total; ++s) {
        const unsigned k = unsigned(__builtin_ctzll(s));
        const std::size_t rest = s & (s - 1);
        double cross = 0.0;
        for (std::size_t j = rest; j != 0; j &= (j - 1)) {
            const unsigned b = unsigned(__builtin_ctzll(j));
            cross += pm.w[b] * pm.at(b, k);
        }
        num[s] = num[rest] + pm.w[k] * (2.0 * cross + pm.w[k] * pm.at(k, k));
        wsum[s] = wsum[rest] + pm.w[k];
        rows.emplace_back(wsum[s], num[s] / (wsum[s] * wsum[s]));
    }
    std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.first > b.first; });
    SubsetEnvelope env;
    env.wts.reserve(rows.size());
    env.best_mean.reserve(rows.size());
    double run = -1.0;
    for (auto& [w, mean] : rows) {
        run = std::max(run, mean);
        env.wts.push_back(w);
        env.best_mean.push_back(run);
    }
    return env;
}

// Sorted-marginal upper bound on max_{|S| = s} E[|X| | S x S] for uniform
// weights: (sum of s largest row partial sums R_i(s)) / s^2.
inline std::vector<double> sorted_marginal_bounds(const PairMatrix& pm) {
    const std::size_t n = pm.n;
    std::vector<double> bound(n + 1, 0.0);
    std::vector<std::vector<double>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i].assign(pm.absx.begin() + std::ptrdiff_t(i * n), pm.absx.begin() + std::ptrdiff_t((i + 1) * n));
        std::sort(rows[i].begin(), rows[i].end(), std::greater<double>());
        for (std::size_t j = 1; j < n; ++j) rows[i][j] += rows[i][j - 1];  // prefix sums
    }
    std::vector<double> col(n);
    for (std::size_t s = 1; s <= n; ++s) {
        for (std::size_t i = 0; i < n; ++i) col[i] = rows[i][s - 1];
        std::nth_element(col.begin(), col.begin() + std::ptrdiff_t(s - 1), col.end(), std::greater<double>());
        double top = 0.0;
        for (std::size_t i = 0; i < s; ++i) top += col[i];
        bound[s] = top / (double(s) * double(s));
    }
    return bound;
}

// Greedy subset of size s with locally maximal conditional mean.
inline double greedy_subset_mean(const PairMatrix& pm, std::size_t s) {
    const std::size_t n = pm.n;
    std::vector<double> rowsum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) rowsum[i] += pm.at(i, j);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rowsum[a] > rowsum[b]; });
    std::vector<char> in(n, 0);
    for (std::size_t i = 0; i < s; ++i) in[order[i]] = 1;
    std::vector<double> contrib(n, 0.0);  // sum over S of |x_ij|
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (in[j]) contrib[i] += pm.at(i, j);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (in[i]) total += contrib[i];
    for (int rounds = 0; rounds < 64; ++rounds) {
        std::size_t worst = n, best = n;
        double worst_v = 1e300, best_v = -1e300;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = 2.0 * contrib[i] - (in[i] ? pm.at(i, i) : -pm.at(i, i));
            if (in[i] && v < worst_v) { worst_v = v; worst = i; }
            if (!in[i] && v > best_v) { best_v = v; best = i; }
        }
        if (worst == n || best == n) break;
        const double delta = (2.0 * contrib[best] + pm.at(best, best) - 2.0 * pm.at(best, worst)) -
                             (2.0 * contrib[worst] - pm.at(worst, worst));
        if (delta <= 1e-15 * std::max(1.0, total)) break;
        in[worst] = 0;
        in[best] = 1;
        for (std::size_t i = 0; i < n; ++i) contrib[i] += pm.at(i, best) - pm.at(i, worst);
        total += delta;
    }
    return total / (double(s) * double(s));
}

}  // namespace detail

inline ProductSdaReport product_sda(const PairMatrix& pm, double m, std::uint64_t cap = kSdaCap) {
    require(m > 0.0, "product_sda: oracle parameter m must be positive");
    ProductSdaReport rep;
    rep.m = m;
    if (pm.n <= 20) {
        auto env = detail::subset_envelope(pm);
        auto ok = [&](std::uint64_t q) { return env.query(1.0 / double(q)) <= 1.0 / m; };
        std::uint64_t q = 0;
        if (ok(1)) {
            if (ok(cap)) q = cap;
            else {
                std::uint64_t lo = 1, hi = cap - 1;
                while (lo < hi) {
                    std::uint64_t mid = lo + (hi - lo + 1) / 2;
                    if (ok(mid)) lo = mid; else hi = mid - 1;
                }
                q = lo;
            }
        }
        rep.q_lower = rep.q_upper = q;
        rep.exact = true;
        rep.unbounded = (q == cap);
        return rep;
    }
    // large families: uniform weights, certified bounds from both sides
    for (double w : pm.w)
        require(std::abs(w - pm.w[0]) <= 1e-12, "product_sda bounds need a uniform prior");
    const std::size_t n = pm.n;
    auto bound = detail::sorted_marginal_bounds(pm);
    std::vector<double> suff(n + 2, 0.0);
    for (std::size_t s = n; s >= 1; --s) suff[s] = std::max(suff[s + 1], bound[s]);
    std::uint64_t qlo = 0;
    for (std::uint64_t q = 1; q <= n + 1; ++q) {
        std::size_t smin = std::size_t((n + q - 1) / q);  // ceil(n/q)
        if (smin > n) smin = n;
        if (suff[smin] <= 1.0 / m) qlo = q;
        else break;
    }
    if (qlo >= n + 1) { qlo = cap; rep.unbounded = true; }
    std::uint64_t qhi = cap;
    for (std::size_t s = 1; s <= n; ++s) {
        if (detail::greedy_subset_mean(pm, s) > 1.0 / m) {
            std::uint64_t kills = std::uint64_t((n + s - 1) / s);  // all q >= ceil(n/s) violated
            qhi = std::min(qhi, kills > 0 ? kills - 1 : 0);
        }
    }
    rep.q_lower = qlo;
    rep.q_upper = std::max(qhi, qlo);
    rep.exact = false;
    return rep;
}

inline ProductSdaReport product_sda(const TestingProblem& pr, double m, std::uint64_t cap = kSdaCap) {
    return product_sda(pair_matrix(pr), m, cap);
}

// ============================================================================
// Fact on moments and tails: for p > q > 0,
//   E|X|^q <= (2 sup_A Pr[A] (E[|X| | A])^p)^{q/p} * p/(p-q)
// ============================================================================

struct MomentTailReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double sup_term = 0.0;
    bool holds = false;
};

inline MomentTailReport moment_tail_check(const std::vector<double>& values,
                                          const std::vector<double>& weights, double p, double q) {
    require(p > q && q > 0.0, "moment_tail_check: need p > q > 0");
    const std::size_t n = values.size();
    require(n <= 12, "moment_tail_check: brute-force sup limited to 2^12 subsets");
    MomentTailReport r;
    CompensatedSum lhs;
    for (std::size_t i = 0; i < n; ++i) lhs.add(weights[i] * std::pow(std::abs(values[i]), q));
    r.lhs = lhs.value();
    const std::size_t total = std::size_t(1) << n;
    std::vector<double> num(total, 0.0), wsum(total, 0.0);
    double sup = 0.0;
    for (std::size_t s = 1; s < total; ++s) {
        const unsigned k = unsigned(__builtin_ctzll(s));
        const std::size_t rest = s & (s - 1);
        num[s] = num[rest] + weights[k] * std::abs(values[k]);
        wsum[s] = wsum[rest] + weights[k];
        if (wsum[s] > 0.0) sup = std::max(sup, wsum[s] * std::pow(num[s] / wsum[s], p));
    }
    r.sup_term = sup;
    r.rhs = std::pow(2.0 * sup, q / p) * p / (p - q);
    r.holds = r.lhs <= r.rhs * (1.0 + 1e-12) + 1e-300;
    return r;
}

// ============================================================================
// Equivalence-direction verifiers
// ============================================================================

// LDLR bounds imply SDA lower bounds:
// with eps = (d,k)-LDLR_m and delta = ||E (Dbar^{>d})^{(x)k}||,
//   SDA(m / (q^{2/k} (k eps^{2/k} + delta^{2/k} m))) >= q.
struct LdlrToSdaReport {
    double eps_sq = 0.0;
    double delta_sq = 0.0;
    double m_star = 0.0;  // infinity encoded as +inf when eps = delta = 0
    double tce_at_q = 0.0;
    std::uint64_t q = 0;
    bool pass = false;
};

inline LdlrToSdaReport verify_ldlr_to_sda(const PairSpectrum& sp, long long m, Degree d, int k,
                                          std::uint64_t q) {
    require(k % 2 == 0, "verify_ldlr_to_sda: k must be even");
    LdlrToSdaReport rep;
    rep.q = q;
    rep.eps_sq = ldlr_norm(sp, m, SamplewiseDegree(d, k)).squared_norm;
    rep.delta_sq = high_degree_norm(sp, d, k);
    const double qd = double(q);
    const double denom = std::pow(qd, 2.0 / k) *
                         (double(k) * std::pow(std::max(rep.eps_sq, 0.0), 1.0 / k) +
                          std::pow(std::max(rep.delta_sq, 0.0), 1.0 / k) * double(m));
    CorrelationAtoms atoms = atoms_of(sp);
    SortedAtoms sorted(atoms);
    rep.tce_at_q = sorted.tce(1.0 / (qd * qd));
    if (denom <= 0.0) {
        rep.m_star = std::numeric_limits<double>::infinity();
        rep.pass = rep.tce_at_q <= 0.0;
    } else {
        rep.m_star = double(m) / denom;
        rep.pass = rep.tce_at_q <= 1.0 / rep.m_star;
    }
    return rep;
}

// SDA lower bounds imply LDLR bounds:
// if SDA(m') >= 100^k (m/m')^k for all 0 <= m' <= m, then
// E|X|^t <= 4 (1/100m)^t for t <= k/8, and the (inf, k/8)-LDLR_m^2 is <= 1.
struct SdaToLdlrReport {
    bool hypothesis_ok = false;
    bool moment_ok = false;
    bool conclusion_ok = false;
    double ldlr_sq = 0.0;
    std::vector<double> grid_m;  // checked m' values
};

inline SdaToLdlrReport verify_sda_to_ldlr(const CorrelationAtoms& atoms, long long m, int k) {
    require(k % 2 == 0 && k >= 8, "verify_sda_to_ldlr: need even k >= 8");
    SortedAtoms sorted(atoms);
    SdaToLdlrReport rep;
    // hypothesis over a logarithmic grid of m' in (1, m] (m' <= 1 is vacuous:
    // every conditional mean is <= max|X| <= 1/m' only matters for m' > 1)
    rep.hypothesis_ok = true;
    for (double mp = 2.0; ; mp *= 2.0) {
        bool last = mp >= double(m);
        if (last) mp = double(m);
        if (mp < 2.0) break;
        rep.grid_m.push_back(mp);
        const double log_q = double(k) * (std::log(100.0) + std::log(double(m) / mp));
        double alpha = (log_q > 340.0) ? 0.0 : std::exp(-2.0 * log_q);
        if (sorted.tce(alpha) > 1.0 / mp) rep.hypothesis_ok = false;
        if (last) break;
    }
    // Lemma moment bound and LDLR conclusion at t <= k/8
    const int tmax = k / 8;
    rep.moment_ok = true;
    CompensatedSum ldlr;
    for (int t = 1; t <= tmax; ++t) {
        CompensatedSum mom_abs, mom_signed;
        for (std::size_t i = 0; i < atoms.values.size(); ++i) {
            mom_abs.add(atoms.weights[i] * std::pow(std::abs(atoms.values[i]), t));
            mom_signed.add(atoms.weights[i] * std::pow(atoms.values[i], t));
        }
        if (mom_abs.value() > 4.0 * std::pow(100.0 * double(m), -t) * (1.0 + 1e-12))
            rep.moment_ok = false;
        ldlr.add(binomial(std::uint64_t(m), std::uint64_t(t)) * mom_signed.value());
    }
    rep.ldlr_sq = ldlr.value();
    rep.conclusion_ok = rep.ldlr_sq <= 1.0 + 1e-12;
    return rep;
}

}  // namespace ldsq
