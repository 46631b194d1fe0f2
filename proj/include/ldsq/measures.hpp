#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/rng.hpp"

namespace ldsq {

// ============================================================================
// Null distributions
// ============================================================================

// One coordinate of a finite product measure: real symbol values and their
// probabilities. Every symbol must have positive probability (no fixed
// coordinates), which keeps relative densities finite.
struct CoordinateMarginal {
    std::vector<double> symbols;
    std::vector<double> probs;
};

inline void validate_marginal(const CoordinateMarginal& c) {
    require(c.symbols.size() >= 2, "coordinate alphabet must have size >= 2");
    require(c.symbols.size() == c.probs.size(), "symbols/probs size mismatch");
    double s = 0.0;
    for (double p : c.probs) {
        require(p > 0.0, "fixed coordinate detected: zero-probability symbol");
        s += p;
    }
    require(std::abs(s - 1.0) <= 1e-12, "coordinate probabilities must sum to 1 within 1e-12");
    for (std::size_t i = 1; i < c.symbols.size(); ++i)
        require(c.symbols[i] > c.symbols[i - 1], "alphabet symbols must be strictly increasing");
}

class ProductNull {
  public:
    ProductNull() = default;
    explicit ProductNull(std::vector<CoordinateMarginal> coords) : coords_(std::move(coords)) {
        for (const auto& c : coords_) validate_marginal(c);
    }

    // n identical coordinates
    static ProductNull iid(int n, CoordinateMarginal c) {
        return ProductNull(std::vector<CoordinateMarginal>(std::size_t(n), std::move(c)));
    }
    static ProductNull uniform_hypercube(int n) {
        return iid(n, CoordinateMarginal{{-1.0, 1.0}, {0.5, 0.5}});
    }
    static ProductNull bernoulli(int n, double q) {
        require(q > 0.0 && q < 1.0, "bernoulli null needs q in (0,1)");
        return iid(n, CoordinateMarginal{{0.0, 1.0}, {1.0 - q, q}});
    }

    int dimension() const { return int(coords_.size()); }
    const CoordinateMarginal& coord(int i) const { return coords_.at(std::size_t(i)); }
    const std::vector<CoordinateMarginal>& coords() const { return coords_; }

    std::uint64_t num_states() const {
        std::uint64_t n = 1;
        for (const auto& c : coords_) {
            n *= c.symbols.size();
            require(n <= dense_state_cap(), "dense state space exceeds the configured cap");
        }
        return n;
    }

    void decode(std::uint64_t state, std::vector<int>& out) const {
        out.resize(coords_.size());
        for (std::size_t i = 0; i < coords_.size(); ++i) {
            std::uint64_t a = coords_[i].symbols.size();
            out[i] = int(state % a);
            state /= a;
        }
    }

    double state_prob(std::uint64_t state) const {
        double p = 1.0;
        for (std::size_t i = 0; i < coords_.size(); ++i) {
            std::uint64_t a = coords_[i].symbols.size();
            p *= coords_[i].probs[state % a];
            state /= a;
        }
        return p;
    }

    bool binary_symmetric() const {
        for (const auto& c : coords_)
            if (c.symbols.size() != 2 || std::abs(c.probs[0] - 0.5) > 1e-14 ||
                std::abs(c.symbols[0] + 1.0) > 1e-14 || std::abs(c.symbols[1] - 1.0) > 1e-14)
                return false;
        return dimension() > 0;
    }

  private:
    std::vector<CoordinateMarginal> coords_;
};

struct GaussianNull {
    int dim = 0;
};

using NullSpec = std::variant<ProductNull, GaussianNull>;

inline int dimension(const NullSpec& n) {
    if (std::holds_alternative<ProductNull>(n)) return std::get<ProductNull>(n).dimension();
    return std::get<GaussianNull>(n).dim;
}

// ============================================================================
// Character basis
// ============================================================================

// Per-coordinate orthonormal polynomial ladder chi^{(0)}, ..., chi^{(a-1)}
// with chi^{(0)} = 1, E chi^{(j)} = 0 for j >= 1, E chi^{(j)}^2 = 1, positive
// leading coefficient (on {+-1} this is the chi(x) >= 0 at x = 1 convention).
// chi^{(j)} has polynomial degree exactly j; tensor products indexed by
// multi-indices form an orthonormal basis of the product space.
struct CharacterBasis {
    // values[i](j, sym) = chi_i^{(j)}(symbol sym)
    std::vector<Eigen::MatrixXd> values;
};

inline Eigen::MatrixXd orthonormal_ladder(const CoordinateMarginal& c) {
    const int a = int(c.symbols.size());
    // rows = monomial ladder evaluated on symbols
    Eigen::MatrixXd v(a, a);
    for (int j = 0; j < a; ++j)
        for (int s = 0; s < a; ++s) v(j, s) = std::pow(c.symbols[std::size_t(s)], j);
    // modified Gram-Schmidt in the pi-weighted inner product, one
    // re-orthogonalization pass, tolerance 1e-12
    auto dot = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
        CompensatedSum s;
        for (int x = 0; x < a; ++x) s.add(c.probs[std::size_t(x)] * f(x) * g(x));
        return s.value();
    };
    Eigen::MatrixXd chi(a, a);
    for (int j = 0; j < a; ++j) {
        Eigen::VectorXd w = v.row(j).transpose();
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < j; ++i) w -= dot(chi.row(i).transpose(), w) * chi.row(i).transpose();
        double n2 = dot(w, w);
        require(n2 > 1e-12, "degenerate coordinate marginal: monomials not independent");
        w /= std::sqrt(n2);
        // sign convention: positive leading coefficient == chi increasing at the top symbol
        if (w(a - 1) < 0.0) w = -w;
        chi.row(j) = w.transpose();
    }
    return chi;
}

inline CharacterBasis character_basis(const ProductNull& null) {
    CharacterBasis b;
    b.values.reserve(std::size_t(null.dimension()));
    for (int i = 0; i < null.dimension(); ++i) b.values.push_back(orthonormal_ladder(null.coord(i)));
    return b;
}

// ============================================================================
// Alternates
// ============================================================================

// Product-form alternate: per-coordinate probability vectors over the null's
// alphabets.
struct ProductAlternate {
    std::vector<std::vector<double>> coord_probs;
};

// Dense table over the null's state space (mixed-radix order).
struct DenseAlternate {
    std::vector<double> probs;
};

// D_u = N(mu, Id)
struct MeanShiftAlternate {
    std::vector<double> mean;
};

// D_u = N(0, (Id + delta)^{-1}); delta symmetric.
struct CovarianceAlternate {
    Eigen::MatrixXd delta;
};

// Dbar_u = 1 + amplitude * chi_mask over the uniform hypercube. Coordinate
// noise only rescales the amplitude, so noised parity problems stay in closed
// form.
struct ParityAlternate {
    std::uint64_t mask = 0;
    double amplitude = 1.0;
};

// Abstract label; correlations must come from the problem's closed form.
struct LabelAlternate {
    std::int64_t label = 0;
};

using Alternate = std::variant<ProductAlternate, DenseAlternate, MeanShiftAlternate,
                               CovarianceAlternate, ParityAlternate, LabelAlternate>;

// ============================================================================
// Prior and problem
// ============================================================================

// Either an explicit weighted list of alternates or a seeded sampler.
struct Prior {
    std::vector<Alternate> alternates;
    std::vector<double> weights;
    std::function<Alternate(RngStream&)> sampler;
    std::uint64_t seed = 0;

    bool explicit_list() const { return !alternates.empty(); }

    static Prior uniform(std::vector<Alternate> alts) {
        Prior p;
        p.weights.assign(alts.size(), 1.0 / double(alts.size()));
        p.alternates = std::move(alts);
        return p;
    }
    static Prior weighted(std::vector<Alternate> alts, std::vector<double> w) {
        Prior p;
        p.alternates = std::move(alts);
        p.weights = std::move(w);
        return p;
    }
    static Prior sampled(std::function<Alternate(RngStream&)> fn, std::uint64_t seed) {
        Prior p;
        p.sampler = std::move(fn);
        p.seed = seed;
        return p;
    }
};

// Closed-form pairwise correlation <Dbar_u^{<=d}, Dbar_v^{<=d}>.
using PairCorrelationFn = std::function<double(const Alternate&, const Alternate&, Degree)>;

// A null distribution, a family of alternates with a prior, and optionally a
// closed-form correlation. The universal input object.
struct TestingProblem {
    std::string id;
    NullSpec null;
    Prior prior;
    PairCorrelationFn closed_form;
};

inline void validate_prior(const Prior& p) {
    if (p.explicit_list()) {
        require(p.alternates.size() == p.weights.size(), "prior weights/alternates size mismatch");
        CompensatedSum s;
        for (double w : p.weights) {
            require(w >= 0.0, "prior weights must be nonnegative");
            s.add(w);
        }
        require(std::abs(s.value() - 1.0) <= 1e-12, "prior weights must sum to 1 within 1e-12");
    } else {
        require(bool(p.sampler), "prior needs an explicit list or a sampler");
    }
}

inline void validate_alternate(const NullSpec& null, const Alternate& alt) {
    if (std::holds_alternative<ProductAlternate>(alt)) {
        const auto& pn = std::get<ProductNull>(null);
        const auto& a = std::get<ProductAlternate>(alt);
        require(int(a.coord_probs.size()) == pn.dimension(), "dimension mismatch");
        for (int i = 0; i < pn.dimension(); ++i) {
            const auto& v = a.coord_probs[std::size_t(i)];
            require(v.size() == pn.coord(i).symbols.size(), "alphabet size mismatch");
            double s = 0.0;
            for (double p : v) {
                require(p >= 0.0, "alternate probabilities must be nonnegative");
                s += p;
            }
            require(std::abs(s - 1.0) <= 1e-10, "alternate coordinate probs must sum to 1 within 1e-10");
        }
    } else if (std::holds_alternative<DenseAlternate>(alt)) {
        const auto& pn = std::get<ProductNull>(null);
        const auto& a = std::get<DenseAlternate>(alt);
        require(a.probs.size() == pn.num_states(), "dense table size mismatch");
        CompensatedSum s;
        for (double p : a.probs) {
            require(p >= 0.0, "alternate probabilities must be nonnegative");
            s.add(p);
        }
        require(std::abs(s.value() - 1.0) <= 1e-10, "dense alternate must sum to 1 within 1e-10");
    } else if (std::holds_alternative<MeanShiftAlternate>(alt)) {
        const auto& g = std::get<GaussianNull>(null);
        const auto& a = std::get<MeanShiftAlternate>(alt);
        require(int(a.mean.size()) == g.dim, "dimension mismatch");
        for (double x : a.mean) require(std::isfinite(x), "mean entries must be finite");
    } else if (std::holds_alternative<CovarianceAlternate>(alt)) {
        const auto& g = std::get<GaussianNull>(null);
        const auto& a = std::get<CovarianceAlternate>(alt);
        require(a.delta.rows() == g.dim && a.delta.cols() == g.dim, "dimension mismatch");
    } else if (std::holds_alternative<ParityAlternate>(alt)) {
        const auto& pn = std::get<ProductNull>(null);
        require(pn.binary_symmetric(), "parity alternates need the uniform hypercube null");
        const auto& a = std::get<ParityAlternate>(alt);
        require(pn.dimension() >= 64 || a.mask < (1ULL << pn.dimension()), "parity mask out of range");
    }
}

inline void validate_problem(const TestingProblem& pr) {
    validate_prior(pr.prior);
    for (const auto& a : pr.prior.alternates) validate_alternate(pr.null, a);
}

// ============================================================================
// Densification helpers
// ============================================================================

inline std::vector<double> dense_table(const ProductNull& null, const ProductAlternate& a) {
    std::uint64_t n = null.num_states();
    std::vector<double> t(n);
    for (std::uint64_t x = 0; x < n; ++x) {
        std::uint64_t s = x;
        double p = 1.0;
        for (int i = 0; i < null.dimension(); ++i) {
            std::uint64_t al = null.coord(i).symbols.size();
            p *= a.coord_probs[std::size_t(i)][s % al];
            s /= al;
        }
        t[x] = p;
    }
    return t;
}

inline std::vector<double> dense_table(const ProductNull& null, const ParityAlternate& a) {
    std::uint64_t n = null.num_states();
    std::vector<double> t(n);
    for (std::uint64_t x = 0; x < n; ++x) {
        // chi_mask(x) = prod of +-1 bits inside the mask; symbol index 1 <-> +1
        int par = 1;
        std::uint64_t s = x, m = a.mask;
        for (int i = 0; m != 0; ++i, m >>= 1, s >>= 1)
            if ((m & 1ULL) && (s & 1ULL) == 0ULL) par = -par;
        t[x] = null.state_prob(x) * (1.0 + a.amplitude * par);
    }
    return t;
}

inline std::vector<double> dense_table(const ProductNull& null, const Alternate& a) {
    if (std::holds_alternative<DenseAlternate>(a)) return std::get<DenseAlternate>(a).probs;
    if (std::holds_alternative<ProductAlternate>(a)) return dense_table(null, std::get<ProductAlternate>(a));
    if (std::holds_alternative<ParityAlternate>(a)) return dense_table(null, std::get<ParityAlternate>(a));
    throw std::invalid_argument("alternate cannot be tabulated on a finite state space");
}

// ============================================================================
// Pairwise correlations
// ============================================================================

namespace detail {

// In-place tensor transform: contract axis i of a mixed-radix table with the
// character matrix, turning probabilities into orthonormal-basis coefficients.
inline void axis_transform(std::vector<double>& t, const ProductNull& null,
                           const CharacterBasis& basis) {
    std::uint64_t stride = 1;
    std::vector<double> tmp;
    for (int i = 0; i < null.dimension(); ++i) {
        const auto& chi = basis.values[std::size_t(i)];
        const std::uint64_t a = null.coord(i).symbols.size();
        tmp.assign(std::size_t(a), 0.0);
        const std::uint64_t n = t.size();
        for (std::uint64_t base = 0; base < n; ) {
            // base runs over states with digit_i == 0
            for (std::uint64_t j = 0; j < a; ++j) tmp[j] = t[base + j * stride];
            for (std::uint64_t j = 0; j < a; ++j) {
                double acc = 0.0;
                for (std::uint64_t s = 0; s < a; ++s) acc += chi(int(j), int(s)) * tmp[s];
                t[base + j * stride] = acc;
            }
            // advance base, skipping the i-th digit
            std::uint64_t b = base + 1;
            if (b % stride == 0) b += stride * (a - 1);
            base = b;
        }
        stride *= a;
    }
}

}  // namespace detail

// Character coefficients of a dense alternate: coeff[idx] = E_{D_u} chi_idx,
// indexed mixed-radix like states. coeff[0] = 1.
inline std::vector<double> character_coefficients(const ProductNull& null, const CharacterBasis& basis,
                                                  const std::vector<double>& dense_probs) {
    std::vector<double> c = dense_probs;
    detail::axis_transform(c, null, basis);
    return c;
}

// Total polynomial degree of each multi-index of the product basis.
inline std::vector<int> basis_degrees(const ProductNull& null) {
    std::uint64_t n = null.num_states();
    std::vector<int> deg(n, 0);
    for (std::uint64_t x = 0; x < n; ++x) {
        std::uint64_t s = x;
        int d = 0;
        for (int i = 0; i < null.dimension(); ++i) {
            std::uint64_t a = null.coord(i).symbols.size();
            d += int(s % a);
            s /= a;
        }
        deg[x] = d;
    }
    return deg;
}

// Precomputed per-alternate data for fast pairwise evaluation.
struct AlternateView {
    const Alternate* alt = nullptr;
    // product backend: coeff[i][j] = E chi_i^{(j)}, j = 0 means the first
    // nonconstant character (storage drops the constant term)
    std::vector<std::vector<double>> prod_coeff;
};

// Correlation preconditions for Claim F.1, reporting which matrix fails.
inline void check_covariance_preconditions(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const auto n = a.rows();
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    auto mineig = [](const Eigen::MatrixXd& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    };
    if (mineig(id + a) <= 0.0)
        throw std::domain_error("covariance precondition violated: Id+A is not positive definite");
    if (mineig(id + b) < -1e-12)
        throw std::domain_error("covariance precondition violated: Id+B is not positive semidefinite");
    if (mineig(id + a + b) <= 0.0)
        throw std::domain_error("covariance precondition violated: Id+A+B is not positive definite");
}

// <Dbar_a, Dbar_b> = det(Id - (Id+A)^{-1} A B (Id+B)^{-1})^{-1/2}
inline double covariance_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    check_covariance_preconditions(a, b);
    const auto n = a.rows();
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd left = (id + a).ldlt().solve(a);                 // (Id+A)^{-1} A
    Eigen::MatrixXd right = (id + b).ldlt().solve(b).transpose();    // B (Id+B)^{-1}
    double det = (id - left * right).determinant();
    require(det > 0.0, "covariance correlation: determinant not positive");
    return 1.0 / std::sqrt(det);
}

// algebraically equivalent form sqrt(det(Id+A) det(Id+B) / det(Id+A+B))
inline double covariance_correlation_alt(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    check_covariance_preconditions(a, b);
    const auto n = a.rows();
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    return std::sqrt((id + a).determinant() * (id + b).determinant() / (id + a + b).determinant());
}

class CorrelationEngine {
  public:
    explicit CorrelationEngine(const TestingProblem& pr) : pr_(&pr) {}

    AlternateView view(const Alternate& a) const {
        AlternateView v;
        v.alt = &a;
        if (std::holds_alternative<ProductAlternate>(a)) {
            const auto& null = std::get<ProductNull>(pr_->null);
            const auto& pa = std::get<ProductAlternate>(a);
            ensure_basis();
            v.prod_coeff.resize(std::size_t(null.dimension()));
            for (int i = 0; i < null.dimension(); ++i) {
                const auto& chi = basis_.values[std::size_t(i)];
                const auto& probs = pa.coord_probs[std::size_t(i)];
                const int al = int(probs.size());
                auto& out = v.prod_coeff[std::size_t(i)];
                out.resize(std::size_t(al - 1));
                for (int j = 1; j < al; ++j) {
                    double acc = 0.0;
                    for (int s = 0; s < al; ++s) acc += probs[std::size_t(s)] * chi(j, s);
                    out[std::size_t(j - 1)] = acc;
                }
            }
        }
        return v;
    }

    double correlation(const AlternateView& u, const AlternateView& v, Degree d) const {
        const Alternate& au = *u.alt;
        const Alternate& av = *v.alt;
        if (pr_->closed_form) return pr_->closed_form(au, av, d);
        require(!std::holds_alternative<LabelAlternate>(au) && !std::holds_alternative<LabelAlternate>(av),
                "label alternates need a closed-form correlation");
        if (std::holds_alternative<MeanShiftAlternate>(au)) {
            require(std::holds_alternative<MeanShiftAlternate>(av), "backend mismatch");
            const auto& mu = std::get<MeanShiftAlternate>(au).mean;
            const auto& mv = std::get<MeanShiftAlternate>(av).mean;
            require(mu.size() == mv.size(), "dimension mismatch");
            return exp_truncated(compensated_dot(mu, mv), d);
        }
        if (std::holds_alternative<CovarianceAlternate>(au)) {
            require(std::holds_alternative<CovarianceAlternate>(av), "backend mismatch");
            require(d.is_unbounded(),
                    "unsupported backend/degree combination: covariance backend has no degree truncation");
            return covariance_correlation(std::get<CovarianceAlternate>(au).delta,
                                          std::get<CovarianceAlternate>(av).delta);
        }
        if (std::holds_alternative<ParityAlternate>(au)) {
            require(std::holds_alternative<ParityAlternate>(av), "backend mismatch");
            const auto& pu = std::get<ParityAlternate>(au);
            const auto& pv = std::get<ParityAlternate>(av);
            if (pu.mask != pv.mask || pu.mask == 0) return 1.0;
            int s = __builtin_popcountll(pu.mask);
            return d.keeps(s) ? 1.0 + pu.amplitude * pv.amplitude : 1.0;
        }
        // finite backends
        if (!u.prod_coeff.empty() && !v.prod_coeff.empty()) return product_pair(u, v, d);
        return dense_pair(u, v, d);
    }

    double correlation(const Alternate& u, const Alternate& v, Degree d) const {
        return correlation(view(u), view(v), d);
    }

    const CharacterBasis& basis() const {
        ensure_basis();
        return basis_;
    }

  private:
    double product_pair(const AlternateView& u, const AlternateView& v, Degree d) const {
        const int n = int(u.prod_coeff.size());
        require(int(v.prod_coeff.size()) == n, "dimension mismatch");
        if (d.is_unbounded()) {
            double acc = 1.0;
            for (int i = 0; i < n; ++i) {
                double t = 1.0;
                const auto& cu = u.prod_coeff[std::size_t(i)];
                const auto& cv = v.prod_coeff[std::size_t(i)];
                for (std::size_t j = 0; j < cu.size(); ++j) t += cu[j] * cv[j];
                acc *= t;
            }
            return acc;
        }
        // degree-budget DP: multiply per-coordinate polynomials in z, where
        // the j-th character contributes z^j, truncated at d
        const int dd = d.value();
        std::vector<double> poly(std::size_t(dd) + 1, 0.0), next(std::size_t(dd) + 1, 0.0);
        poly[0] = 1.0;
        for (int i = 0; i < n; ++i) {
            const auto& cu = u.prod_coeff[std::size_t(i)];
            const auto& cv = v.prod_coeff[std::size_t(i)];
            std::fill(next.begin(), next.end(), 0.0);
            for (int t = 0; t <= dd; ++t) {
                if (poly[std::size_t(t)] == 0.0) continue;
                next[std::size_t(t)] += poly[std::size_t(t)];
                for (std::size_t j = 0; j < cu.size() && t + int(j) + 1 <= dd; ++j)
                    next[std::size_t(t + int(j) + 1)] += poly[std::size_t(t)] * cu[j] * cv[j];
            }
            poly.swap(next);
        }
        CompensatedSum s;
        for (double x : poly) s.add(x);
        return s.value();
    }

    void ensure_basis() const {
        if (basis_.values.empty())
            basis_ = character_basis(std::get<ProductNull>(pr_->null));
    }

    double dense_pair(const AlternateView& u0, const AlternateView& v0, Degree d) const {
        const auto& null = std::get<ProductNull>(pr_->null);
        if (d.is_unbounded()) {
            // direct exact summation; likelihood ratios go through log space
            // when the null mass underflows toward 1e-300
            auto tu = dense_table(null, *u0.alt);
            auto tv = dense_table(null, *v0.alt);
            require(tu.size() == tv.size(), "dimension mismatch");
            CompensatedSum s;
            for (std::uint64_t x = 0; x < tu.size(); ++x) {
                const double pi = null.state_prob(x);
                if (pi >= 1e-300) {
                    s.add(tu[x] * tv[x] / pi);
                } else if (tu[x] > 0.0 && tv[x] > 0.0) {
                    s.add(std::exp(std::log(tu[x]) + std::log(tv[x]) - std::log(pi)));
                }
            }
            return s.value();
        }
        ensure_basis();
        if (degrees_.empty()) degrees_ = basis_degrees(null);
        auto cu = coefficients(*u0.alt);
        auto cv = coefficients(*v0.alt);
        require(cu->size() == cv->size(), "dimension mismatch");
        CompensatedSum s;
        for (std::size_t i = 0; i < cu->size(); ++i)
            if (d.keeps(degrees_[i])) s.add((*cu)[i] * (*cv)[i]);
        return s.value();
    }

    std::shared_ptr<const std::vector<double>> coefficients(const Alternate& a) const {
        // cache only alternates owned by the problem's prior; sampled
        // alternates are transient and their addresses are reused
        const auto& alts = pr_->prior.alternates;
        const bool stable = !alts.empty() && &a >= alts.data() && &a < alts.data() + alts.size();
        if (stable) {
            auto it = coeff_cache_.find(&a);
            if (it != coeff_cache_.end()) return it->second;
        }
        const auto& null = std::get<ProductNull>(pr_->null);
        auto c = std::make_shared<const std::vector<double>>(
            character_coefficients(null, basis_, dense_table(null, a)));
        if (stable) coeff_cache_.emplace(&a, c);
        return c;
    }

    const TestingProblem* pr_;
    mutable CharacterBasis basis_;
    mutable std::vector<int> degrees_;
    mutable std::map<const Alternate*, std::shared_ptr<const std::vector<double>>> coeff_cache_;
};

// --- spec operations --------------------------------------------------------

// <Dbar_u, Dbar_v> with respect to the null.
inline double inner_product(const Alternate& u, const Alternate& v, const TestingProblem& pr) {
    return CorrelationEngine(pr).correlation(u, v, Degree::unbounded());
}

// <Dbar_u^{<=d}, Dbar_v^{<=d}>.
inline double low_degree_correlation(const Alternate& u, const Alternate& v, Degree d,
                                     const TestingProblem& pr) {
    return CorrelationEngine(pr).correlation(u, v, d);
}

// ============================================================================
// Pair spectrum and correlation atoms
// ============================================================================

// Exact weighted law of the pair correlation under independent prior draws,
// degree-resolved. The common currency of LDLR and SDA computations.
class PairSpectrum {
  public:
    using CorrFn = std::function<double(std::size_t, Degree)>;

    PairSpectrum() = default;
    PairSpectrum(std::vector<double> weights, CorrFn corr)
        : w_(std::move(weights)), corr_(std::move(corr)) {}

    std::size_t count() const { return w_.size(); }
    double weight(std::size_t i) const { return w_[i]; }
    double correlation(std::size_t i, Degree d = Degree::unbounded()) const { return corr_(i, d); }

  private:
    std::vector<double> w_;
    CorrFn corr_;
};

// Spectrum of an explicit-prior problem: unordered pairs (i <= j), off-diagonal
// weight doubled (correlation is symmetric in (u, v)).
inline PairSpectrum exact_spectrum(const TestingProblem& pr) {
    require(pr.prior.explicit_list(), "exact spectrum requires an explicit-list prior");
    auto eng = std::make_shared<CorrelationEngine>(pr);
    auto views = std::make_shared<std::vector<AlternateView>>();
    const auto& alts = pr.prior.alternates;
    views->reserve(alts.size());
    for (const auto& a : alts) views->push_back(eng->view(a));
    std::vector<double> w;
    auto pairs = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>();
    for (std::size_t i = 0; i < alts.size(); ++i)
        for (std::size_t j = i; j < alts.size(); ++j) {
            double ww = pr.prior.weights[i] * pr.prior.weights[j] * (i == j ? 1.0 : 2.0);
            if (ww == 0.0) continue;
            w.push_back(ww);
            pairs->push_back({i, j});
        }
    return PairSpectrum(std::move(w), [eng, views, pairs](std::size_t a, Degree d) {
        auto [i, j] = (*pairs)[a];
        return eng->correlation((*views)[i], (*views)[j], d);
    });
}

// The distribution of <Dbar_u, Dbar_v> - 1 under the prior: exact weighted
// atoms or seeded Monte-Carlo draws. Values are signed; SDA takes |.|.
struct CorrelationAtoms {
    std::vector<double> weights;
    std::vector<double> values;
    bool empirical = false;
    std::uint64_t seed = 0;
    std::uint64_t budget = 0;
};

enum class AtomsMode { Exact, MonteCarlo };

inline CorrelationAtoms atoms_of(const PairSpectrum& sp, Degree d = Degree::unbounded()) {
    CorrelationAtoms a;
    a.weights.reserve(sp.count());
    a.values.reserve(sp.count());
    for (std::size_t i = 0; i < sp.count(); ++i) {
        a.weights.push_back(sp.weight(i));
        a.values.push_back(sp.correlation(i, d) - 1.0);
    }
    return a;
}

namespace detail {

inline Alternate draw_alternate(const Prior& prior, RngStream& rng) {
    if (prior.explicit_list()) {
        double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < prior.weights.size(); ++i) {
            acc += prior.weights[i];
            if (u < acc) return prior.alternates[i];
        }
        return prior.alternates.back();
    }
    return prior.sampler(rng);
}

}  // namespace detail

inline CorrelationAtoms correlation_atoms(const TestingProblem& pr, AtomsMode mode,
                                          std::uint64_t budget = 0, std::uint64_t seed = 0) {
    if (mode == AtomsMode::Exact) {
        require(pr.prior.explicit_list(), "exact correlation atoms require an explicit-list prior");
        return atoms_of(exact_spectrum(pr));
    }
    require(budget > 0, "Monte-Carlo atoms need a positive budget");
    CorrelationEngine eng(pr);
    CorrelationAtoms a;
    a.empirical = true;
    a.seed = seed;
    a.budget = budget;
    a.weights.assign(budget, 1.0 / double(budget));
    a.values.resize(budget);
    // chunked so budgets can be partitioned across workers with derived
    // seeds and merged order-independently
    const std::uint64_t chunk = 1024;
    for (std::uint64_t c = 0, k = 0; k < budget; ++c) {
        RngStream rng(derive_seed(seed, c));
        for (std::uint64_t i = 0; i < chunk && k < budget; ++i, ++k) {
            Alternate u = detail::draw_alternate(pr.prior, rng);
            Alternate v = detail::draw_alternate(pr.prior, rng);
            a.values[k] = eng.correlation(u, v, Degree::unbounded()) - 1.0;
        }
    }
    return a;
}

}  // namespace ldsq
