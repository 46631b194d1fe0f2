#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/ldlr.hpp"
#include "ldsq/measures.hpp"

namespace ldsq {

// ============================================================================
// Single-coordinate Markov operators
// ============================================================================

// Row-stochastic kernel K(x, y) = P(next = y | current = x) applied to
// samples coordinatewise. Must be stationary with respect to the null
// coordinate marginal.
struct MarkovOperatorSpec {
    Eigen::MatrixXd kernel;

    static MarkovOperatorSpec identity(int a) { return {Eigen::MatrixXd::Identity(a, a)}; }

    // full resample from the marginal (rho = 0 case)
    static MarkovOperatorSpec resampler(const CoordinateMarginal& c) {
        const int a = int(c.symbols.size());
        Eigen::MatrixXd k(a, a);
        for (int x = 0; x < a; ++x)
            for (int y = 0; y < a; ++y) k(x, y) = c.probs[std::size_t(y)];
        return {k};
    }

    // keep with probability rho, else resample: the discrete noise operator
    static MarkovOperatorSpec t_rho(double rho, const CoordinateMarginal& c) {
        require(rho >= 0.0 && rho <= 1.0, "t_rho: rho must be in [0,1]");
        const int a = int(c.symbols.size());
        Eigen::MatrixXd k(a, a);
        for (int x = 0; x < a; ++x)
            for (int y = 0; y < a; ++y) k(x, y) = (1.0 - rho) * c.probs[std::size_t(y)] + (x == y ? rho : 0.0);
        return {k};
    }
};

inline void validate_operator(const MarkovOperatorSpec& spec, const CoordinateMarginal& marginal) {
    const auto a = spec.kernel.rows();
    require(spec.kernel.cols() == a, "operator kernel must be square");
    require(std::size_t(a) == marginal.symbols.size(), "operator/alphabet size mismatch");
    for (Eigen::Index x = 0; x < a; ++x) {
        double s = 0.0;
        for (Eigen::Index y = 0; y < a; ++y) {
            require(spec.kernel(x, y) >= -1e-15, "operator entries must be nonnegative");
            s += spec.kernel(x, y);
        }
        require(std::abs(s - 1.0) <= 1e-12, "operator rows must sum to 1 within 1e-12");
    }
    for (Eigen::Index y = 0; y < a; ++y) {
        double s = 0.0;
        for (Eigen::Index x = 0; x < a; ++x) s += marginal.probs[std::size_t(x)] * spec.kernel(x, y);
        require(std::abs(s - marginal.probs[std::size_t(y)]) <= 1e-10,
                "non-stationary operator: pi K != pi");
    }
}

// Matrix of the operator on functions, (Tf)(x) = E[f(x') | x], expressed in
// the orthonormal character ladder of the marginal.
inline Eigen::MatrixXd operator_in_character_basis(const MarkovOperatorSpec& spec,
                                                   const CoordinateMarginal& marginal) {
    const int a = int(marginal.symbols.size());
    Eigen::MatrixXd chi = orthonormal_ladder(marginal);  // chi(j, sym)
    Eigen::MatrixXd m(a, a);
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < a; ++j) {
            CompensatedSum acc;
            for (int x = 0; x < a; ++x) {
                double tf = 0.0;
                for (int y = 0; y < a; ++y) tf += spec.kernel(x, y) * chi(j, y);
                acc.add(marginal.probs[std::size_t(x)] * chi(i, x) * tf);
            }
            m(i, j) = acc.value();
        }
    return m;
}

// Nonconstant attenuation factor of a binary-alphabet operator (the single
// nontrivial eigenvalue).
inline double binary_eigenvalue(const MarkovOperatorSpec& spec, const CoordinateMarginal& marginal) {
    require(marginal.symbols.size() == 2, "binary_eigenvalue needs a two-symbol alphabet");
    return operator_in_character_basis(spec, marginal)(1, 1);
}

// ============================================================================
// (d, eps)-operator certification
//
// Certifies the product extension T^{(x)N} for every N: the orthogonal
// complement of degree-(d-1) functions lies in the span of eigenfunctions
// with |lambda| <= eps. Sound when the kernel preserves the polynomial degree
// filtration (checked); eigenvalue tolerance 1e-9, borderline operators
// report uncertified rather than pass.
// ============================================================================

struct CertifyReport {
    bool certified = false;
    bool defective = false;
    bool filtration_preserving = true;
    double bound = 1.0;                  // max |eigenvalue product| at total degree >= d
    std::vector<double> eigenvalues;     // spectrum magnitudes by degree (diagonal of the
                                         // triangular character-basis representative)
};

inline CertifyReport certify_d_eps(const MarkovOperatorSpec& spec, const CoordinateMarginal& marginal,
                                   int d, double eps) {
    require(d >= 1, "certify_d_eps: d must be >= 1");
    require(marginal.symbols.size() <= 64, "certify_d_eps: alphabet size capped at 64");
    validate_operator(spec, marginal);
    const int a = int(marginal.symbols.size());
    Eigen::MatrixXd m = operator_in_character_basis(spec, marginal);

    CertifyReport rep;
    // diagonalizability probe
    Eigen::EigenSolver<Eigen::MatrixXd> es(m);
    Eigen::MatrixXcd vecs = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vecs);
    double cond = svd.singularValues()(0) / std::max(svd.singularValues()(a - 1), 1e-300);
    if (!(cond < 1e9)) {
        rep.defective = true;
        return rep;
    }
    // does T map degree-<=j spans into themselves?
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < i; ++j)
            if (std::abs(m(i, j)) > 1e-9) rep.filtration_preserving = false;
    if (!rep.filtration_preserving) return rep;

    // triangular representative: degree-j attenuation on the diagonal
    std::vector<double> g(std::size_t(a), 0.0);
    for (int j = 0; j < a; ++j) {
        g[std::size_t(j)] = std::abs(m(j, j));
        rep.eigenvalues.push_back(m(j, j));
    }
    // h(t) = max over multisets of degrees j >= 1 with total >= t of prod g[j]
    std::vector<double> h(std::size_t(d) + 1, 1.0);
    for (int t = 1; t <= d; ++t) {
        double best = 0.0;
        for (int j = 1; j < a; ++j) {
            if (j >= t)
                best = std::max(best, g[std::size_t(j)]);
            else
                best = std::max(best, g[std::size_t(j)] * h[std::size_t(t - j)]);
        }
        h[std::size_t(t)] = best;
    }
    rep.bound = h[std::size_t(d)];
    rep.certified = rep.bound <= eps + 1e-9;
    return rep;
}

// ============================================================================
// Applying noise and random restrictions
// ============================================================================

enum class RestrictionMode { Coordinate, Subtensor, Subset };

// Coordinate restrictions live on [N] directly; subtensor restrictions
// identify [N] with [n]^p and restrict to R^{(x)p}; subset restrictions
// identify [N] with the p-subsets of [n] in colex order and restrict to
// C(R, p). One R is drawn per problem draw and shared by all samples;
// per-sample independent restrictions are not implemented.
struct RestrictionSpec {
    RestrictionMode mode = RestrictionMode::Coordinate;
    int p = 1;        // tensor order (subtensor / subset modes)
    int modes_n = 0;  // n: size of the mode index set (coordinate mode: N)
    double rate = 0.0;  // inclusion probability s/n
    MarkovOperatorSpec base;
};

namespace detail {

// mode tuple of each coordinate index under the restriction scheme
inline std::vector<std::vector<int>> coordinate_modes(const RestrictionSpec& spec, int n_coords) {
    std::vector<std::vector<int>> modes(std::size_t(n_coords), std::vector<int>{});
    const int n = spec.modes_n;
    if (spec.mode == RestrictionMode::Coordinate) {
        require(n == n_coords, "restriction mode index set must match coordinate count");
        for (int c = 0; c < n_coords; ++c) modes[std::size_t(c)] = {c};
    } else if (spec.mode == RestrictionMode::Subtensor) {
        std::uint64_t expect = 1;
        for (int i = 0; i < spec.p; ++i) expect *= std::uint64_t(n);
        require(expect == std::uint64_t(n_coords), "subtensor restriction needs N = n^p");
        for (int c = 0; c < n_coords; ++c) {
            int x = c;
            for (int i = 0; i < spec.p; ++i) {
                modes[std::size_t(c)].push_back(x % n);
                x /= n;
            }
        }
    } else {
        require(double(binomial(std::uint64_t(n), std::uint64_t(spec.p))) == double(n_coords),
                "subset restriction needs N = C(n,p)");
        // enumerate p-subsets in colex order
        std::vector<int> sub(std::size_t(spec.p), 0);
        for (int i = 0; i < spec.p; ++i) sub[std::size_t(i)] = i;
        for (int c = 0; c < n_coords; ++c) {
            modes[std::size_t(c)] = sub;
            // next colex subset
            int i = 0;
            while (i + 1 < spec.p && sub[std::size_t(i)] + 1 == sub[std::size_t(i + 1)]) ++i;
            ++sub[std::size_t(i)];
            for (int j = 0; j < i; ++j) sub[std::size_t(j)] = j;
        }
    }
    return modes;
}

inline bool in_restricted_set(const std::vector<int>& coord_modes, std::uint64_t r_mask) {
    for (int m : coord_modes)
        if (!(r_mask >> m & 1ULL)) return false;
    return true;
}

inline std::vector<double> apply_kernel(const std::vector<double>& probs, const Eigen::MatrixXd& k) {
    const int a = int(probs.size());
    std::vector<double> out(std::size_t(a), 0.0);
    for (int y = 0; y < a; ++y) {
        CompensatedSum acc;
        for (int x = 0; x < a; ++x) acc.add(probs[std::size_t(x)] * k(x, y));
        out[std::size_t(y)] = acc.value();
    }
    return out;
}

// Apply the kernel along selected axes of a dense table.
inline void apply_kernel_dense(std::vector<double>& t, const ProductNull& null,
                               const MarkovOperatorSpec& op, const std::vector<char>& noisy_axis) {
    std::uint64_t stride = 1;
    for (int i = 0; i < null.dimension(); ++i) {
        const std::uint64_t a = null.coord(i).symbols.size();
        if (noisy_axis[std::size_t(i)]) {
            std::vector<double> tmp(std::size_t(a), 0.0);
            const std::uint64_t n = t.size();
            for (std::uint64_t base = 0; base < n;) {
                for (std::uint64_t x = 0; x < a; ++x) tmp[x] = t[base + x * stride];
                for (std::uint64_t y = 0; y < a; ++y) {
                    double acc = 0.0;
                    for (std::uint64_t x = 0; x < a; ++x) acc += tmp[x] * op.kernel(int(x), int(y));
                    t[base + y * stride] = acc;
                }
                std::uint64_t b = base + 1;
                if (b % stride == 0) b += stride * (a - 1);
                base = b;
            }
        }
        stride *= a;
    }
}

inline Alternate noised_alternate(const ProductNull& null, const Alternate& alt,
                                  const MarkovOperatorSpec& op, std::uint64_t restricted_mask,
                                  const std::vector<std::vector<int>>& modes) {
    const int n = null.dimension();
    std::vector<char> noisy(std::size_t(n), 0);
    for (int c = 0; c < n; ++c) noisy[std::size_t(c)] = !in_restricted_set(modes[std::size_t(c)], restricted_mask);
    if (std::holds_alternative<ProductAlternate>(alt)) {
        ProductAlternate out = std::get<ProductAlternate>(alt);
        for (int c = 0; c < n; ++c)
            if (noisy[std::size_t(c)]) out.coord_probs[std::size_t(c)] = apply_kernel(out.coord_probs[std::size_t(c)], op.kernel);
        return out;
    }
    if (std::holds_alternative<ParityAlternate>(alt)) {
        ParityAlternate out = std::get<ParityAlternate>(alt);
        const double lam = binary_eigenvalue(op, null.coord(0));
        for (int c = 0; c < n; ++c)
            if (noisy[std::size_t(c)] && (out.mask >> c & 1ULL)) out.amplitude *= lam;
        return out;
    }
    if (std::holds_alternative<DenseAlternate>(alt)) {
        DenseAlternate out = std::get<DenseAlternate>(alt);
        apply_kernel_dense(out.probs, null, op, noisy);
        return out;
    }
    throw std::invalid_argument("apply_noise: incompatible backend");
}

}  // namespace detail

// Coordinatewise noise on every coordinate: (D_null, S) -> (D_null, T S).
inline TestingProblem apply_noise(const TestingProblem& pr, const MarkovOperatorSpec& op) {
    require(std::holds_alternative<ProductNull>(pr.null), "apply_noise: finite product backend required");
    const auto& null = std::get<ProductNull>(pr.null);
    for (int i = 0; i < null.dimension(); ++i) validate_operator(op, null.coord(i));
    TestingProblem out;
    out.id = pr.id + "+noise";
    out.null = pr.null;
    const auto modes = detail::coordinate_modes(
        RestrictionSpec{RestrictionMode::Coordinate, 1, null.dimension(), 0.0, op}, null.dimension());
    if (pr.prior.explicit_list()) {
        std::vector<Alternate> alts;
        for (const auto& a : pr.prior.alternates)
            alts.push_back(detail::noised_alternate(null, a, op, 0ULL, modes));
        out.prior = Prior::weighted(std::move(alts), pr.prior.weights);
    } else {
        auto base = pr.prior.sampler;
        auto null_copy = null;
        auto op_copy = op;
        out.prior = Prior::sampled(
            [base, null_copy, op_copy, modes](RngStream& rng) {
                return detail::noised_alternate(null_copy, base(rng), op_copy, 0ULL, modes);
            },
            pr.prior.seed);
    }
    return out;
}

// Random restriction: prior over composite labels (u, R), exact enumeration of
// R for mode sets up to 12, seeded sampling otherwise.
inline TestingProblem apply_noise(const TestingProblem& pr, const RestrictionSpec& spec,
                                  std::uint64_t seed = 0) {
    require(std::holds_alternative<ProductNull>(pr.null), "apply_noise: finite product backend required");
    require(spec.rate >= 0.0 && spec.rate <= 1.0, "restriction rate must be in [0,1]");
    const auto& null = std::get<ProductNull>(pr.null);
    for (int i = 0; i < null.dimension(); ++i) validate_operator(spec.base, null.coord(i));
    const auto modes = detail::coordinate_modes(spec, null.dimension());
    const int n = spec.modes_n;

    TestingProblem out;
    out.id = pr.id + "+restriction";
    out.null = pr.null;
    if (pr.prior.explicit_list() && n <= restriction_enumeration_cap()) {
        std::vector<Alternate> alts;
        std::vector<double> w;
        for (std::uint64_t r = 0; r < (1ULL << n); ++r) {
            const int bits = __builtin_popcountll(r);
            const double pr_r = std::pow(spec.rate, bits) * std::pow(1.0 - spec.rate, n - bits);
            if (pr_r == 0.0) continue;
            for (std::size_t u = 0; u < pr.prior.alternates.size(); ++u) {
                alts.push_back(detail::noised_alternate(null, pr.prior.alternates[u], spec.base, r, modes));
                w.push_back(pr.prior.weights[u] * pr_r);
            }
        }
        out.prior = Prior::weighted(std::move(alts), std::move(w));
    } else {
        auto base_prior = pr.prior;
        auto null_copy = null;
        auto spec_copy = spec;
        out.prior = Prior::sampled(
            [base_prior, null_copy, spec_copy, modes, n](RngStream& rng) {
                Alternate u = detail::draw_alternate(base_prior, rng);
                std::uint64_t r = 0;
                for (int i = 0; i < n; ++i)
                    if (rng.bernoulli(spec_copy.rate)) r |= 1ULL << i;
                return detail::noised_alternate(null_copy, u, spec_copy.base, r, modes);
            },
            seed);
    }
    return out;
}

// ============================================================================
// Niceness certificates
// ============================================================================

// (delta, k)-niceness via the purely-high-degree norm bound: valid when
// delta = ||E (Dbar^{>k})^{(x)k}||^{1/2-norm} is at most m^{-k/2}/4.
struct NicenessCertificate {
    double delta_sq = 0.0;
    double threshold_sq = 0.0;  // (m^{-k/2}/4)^2
    bool valid = false;
};

inline NicenessCertificate niceness_certificate(const PairSpectrum& sp, double m, int k) {
    require(k % 2 == 0, "niceness_certificate: k must be even");
    NicenessCertificate cert;
    cert.delta_sq = high_degree_norm(sp, Degree(k), k);
    const double thr = std::pow(m, -double(k) / 2.0) / 4.0;
    cert.threshold_sq = thr * thr;
    cert.valid = cert.delta_sq <= cert.threshold_sq;
    return cert;
}

inline NicenessCertificate niceness_certificate(const TestingProblem& pr, double m, int k) {
    return niceness_certificate(exact_spectrum(pr), m, k);
}

// ============================================================================
// Restriction norm bounds (exact Fourier enumeration vs the stated bounds)
// ============================================================================

// Coefficient shapes with tractable restricted inner products over the
// hypercube: u_alpha = scale * prod_{j in alpha} g_j, or a single character.
struct ScaledProductCoeffs {
    double scale = 1.0;
    std::vector<double> g;
};
struct SingleCharCoeffs {
    std::uint64_t mask = 0;
    double amp = 1.0;
};
using CoeffShape = std::variant<ScaledProductCoeffs, SingleCharCoeffs>;

struct RestrictionBoundReport {
    double lhs = 0.0;        // || E_{R,u} (T^{Rbar} Dbar_u^{>d})^{(x)k} ||^2
    double rhs = 0.0;        // stated bound  x  ||E_u Dbar_u^{(x)k}||^2
    double factor = 0.0;     // the max{...} factor
    double ksample_sq = 0.0; // ||E_u Dbar_u^{(x)k}||^2
    double rho = 0.0;        // |lambda_1| of the base operator
    double margin = 0.0;     // rhs - lhs
};

namespace detail {

// <T^{Rbar_u} Dbar_u^{>d}, T^{Rbar_v} Dbar_v^{>d}> for one (R_u, R_v) pair.
inline double restricted_pair_inner(const CoeffShape& su, const CoeffShape& sv, double lam, int d,
                                    std::uint64_t ru, std::uint64_t rv,
                                    const std::vector<std::vector<int>>& modes) {
    const int n_coords = int(modes.size());
    auto lam_pow = [&](int coord, std::uint64_t ru_mask, std::uint64_t rv_mask) {
        int e = (in_restricted_set(modes[std::size_t(coord)], ru_mask) ? 0 : 1) +
                (in_restricted_set(modes[std::size_t(coord)], rv_mask) ? 0 : 1);
        return e == 0 ? 1.0 : std::pow(lam, e);
    };
    if (std::holds_alternative<SingleCharCoeffs>(su) && std::holds_alternative<SingleCharCoeffs>(sv)) {
        const auto& a = std::get<SingleCharCoeffs>(su);
        const auto& b = std::get<SingleCharCoeffs>(sv);
        if (a.mask != b.mask || __builtin_popcountll(a.mask) <= d) return 0.0;
        double f = a.amp * b.amp;
        for (int c = 0; c < n_coords; ++c)
            if (a.mask >> c & 1ULL) f *= lam_pow(c, ru, rv);
        return f;
    }
    if (std::holds_alternative<ScaledProductCoeffs>(su) && std::holds_alternative<ScaledProductCoeffs>(sv)) {
        const auto& a = std::get<ScaledProductCoeffs>(su);
        const auto& b = std::get<ScaledProductCoeffs>(sv);
        std::vector<double> t(std::size_t(n_coords), 0.0);
        for (int c = 0; c < n_coords; ++c)
            t[std::size_t(c)] = a.g[std::size_t(c)] * b.g[std::size_t(c)] * lam_pow(c, ru, rv);
        double full = 1.0;
        for (double x : t) full *= 1.0 + x;
        auto e = elementary_symmetric_all(t, d);
        CompensatedSum low;
        for (double x : e) low.add(x);
        return a.scale * b.scale * (full - low.value());
    }
    // mixed: the product side evaluated at the character's mask
    const auto& sc = std::holds_alternative<SingleCharCoeffs>(su) ? std::get<SingleCharCoeffs>(su)
                                                                  : std::get<SingleCharCoeffs>(sv);
    const auto& sp = std::holds_alternative<ScaledProductCoeffs>(su) ? std::get<ScaledProductCoeffs>(su)
                                                                     : std::get<ScaledProductCoeffs>(sv);
    if (__builtin_popcountll(sc.mask) <= d) return 0.0;
    double f = sc.amp * sp.scale;
    for (int c = 0; c < n_coords; ++c)
        if (sc.mask >> c & 1ULL) f *= sp.g[std::size_t(c)] * lam_pow(c, ru, rv);
    return f;
}

// <Dbar_u - 1, Dbar_v - 1> without noise or truncation.
inline double shape_inner(const CoeffShape& su, const CoeffShape& sv, int n_coords) {
    if (std::holds_alternative<SingleCharCoeffs>(su) && std::holds_alternative<SingleCharCoeffs>(sv)) {
        const auto& a = std::get<SingleCharCoeffs>(su);
        const auto& b = std::get<SingleCharCoeffs>(sv);
        return (a.mask == b.mask && a.mask != 0) ? a.amp * b.amp : 0.0;
    }
    if (std::holds_alternative<ScaledProductCoeffs>(su) && std::holds_alternative<ScaledProductCoeffs>(sv)) {
        const auto& a = std::get<ScaledProductCoeffs>(su);
        const auto& b = std::get<ScaledProductCoeffs>(sv);
        double full = 1.0;
        for (int c = 0; c < n_coords; ++c) full *= 1.0 + a.g[std::size_t(c)] * b.g[std::size_t(c)];
        return a.scale * b.scale * (full - 1.0);
    }
    const auto& sc = std::holds_alternative<SingleCharCoeffs>(su) ? std::get<SingleCharCoeffs>(su)
                                                                  : std::get<SingleCharCoeffs>(sv);
    const auto& sp = std::holds_alternative<ScaledProductCoeffs>(su) ? std::get<ScaledProductCoeffs>(su)
                                                                     : std::get<ScaledProductCoeffs>(sv);
    if (sc.mask == 0) return 0.0;
    double f = sc.amp * sp.scale;
    for (int c = 0; c < n_coords; ++c)
        if (sc.mask >> c & 1ULL) f *= sp.g[std::size_t(c)];
    return f;
}

}  // namespace detail

inline RestrictionBoundReport verify_restriction_bounds(const std::vector<CoeffShape>& shapes,
                                                        const std::vector<double>& weights,
                                                        int n_coords, const RestrictionSpec& spec,
                                                        const CoordinateMarginal& marginal, int d,
                                                        int k) {
    require(d >= 0, "verify_restriction_bounds: negative degree sentinel rejected");
    require(k >= 2 && k % 2 == 0, "verify_restriction_bounds: k must be even and >= 2");
    require(spec.modes_n <= 12, "verify_restriction_bounds: infeasible size (mode set > 12)");
    validate_operator(spec.base, marginal);
    const double lam = binary_eigenvalue(spec.base, marginal);
    const double rho = std::abs(lam);
    const int n = spec.modes_n;
    const double s_eff = spec.rate * double(n);
    const auto modes = detail::coordinate_modes(spec, n_coords);

    if (spec.mode != RestrictionMode::Coordinate) {
        require(2.0 * s_eff <= double(n), "subtensor/subset bound needs 2s <= n");
        require(std::pow(2.0, double(spec.p) / double(k)) * rho <= 1.0 + 1e-12,
                "subtensor/subset bound needs 2^{p/k} rho <= 1");
    }

    // restriction masses
    const std::uint64_t nr = 1ULL << n;
    std::vector<double> pr_r(nr);
    for (std::uint64_t r = 0; r < nr; ++r) {
        const int bits = __builtin_popcountll(r);
        pr_r[r] = std::pow(spec.rate, bits) * std::pow(1.0 - spec.rate, n - bits);
    }

    RestrictionBoundReport rep;
    rep.rho = rho;
    // LHS: expectation over two independent draws of (u, R)
    CompensatedSum lhs;
    for (std::size_t u = 0; u < shapes.size(); ++u)
        for (std::size_t v = 0; v < shapes.size(); ++v) {
            const double wuv = weights[u] * weights[v];
            if (wuv == 0.0) continue;
            for (std::uint64_t ru = 0; ru < nr; ++ru) {
                if (pr_r[ru] == 0.0) continue;
                for (std::uint64_t rv = 0; rv < nr; ++rv) {
                    if (pr_r[rv] == 0.0) continue;
                    const double base =
                        detail::restricted_pair_inner(shapes[u], shapes[v], lam, d, ru, rv, modes);
                    lhs.add(wuv * pr_r[ru] * pr_r[rv] * std::pow(base, k));
                }
            }
        }
    rep.lhs = lhs.value();

    // ||E_u Dbar_u^{(x)k}||^2 = E_{u,v} <Dbar_u, Dbar_v>^k (unrestricted)
    CompensatedSum ks;
    for (std::size_t u = 0; u < shapes.size(); ++u)
        for (std::size_t v = 0; v < shapes.size(); ++v) {
            const double corr = 1.0 + detail::shape_inner(shapes[u], shapes[v], n_coords);
            ks.add(weights[u] * weights[v] * std::pow(corr, k));
        }
    rep.ksample_sq = ks.value();

    const double dd = double(d);
    if (spec.mode == RestrictionMode::Coordinate) {
        rep.factor = std::max(std::pow(4.0, dd + 1.0) * std::pow(rho, 2.0 * (dd + 1.0) * k),
                              std::pow(2.0 * s_eff / double(n), 2.0 * (dd + 1.0)));
    } else {
        rep.factor = std::max(std::pow(4.0, dd + 1.0) * std::pow(rho, (dd + 1.0) * double(k) / spec.p),
                              std::pow(2.0 * s_eff / double(n),
                                       2.0 * std::pow(0.5 * (dd + 1.0), 1.0 / double(spec.p))));
    }
    rep.rhs = rep.factor * rep.ksample_sq;
    rep.margin = rep.rhs - rep.lhs;
    return rep;
}

// Extract coefficient shapes from product / parity alternates over a
// symmetric binary null.
inline std::vector<CoeffShape> coefficient_shapes(const TestingProblem& pr) {
    require(std::holds_alternative<ProductNull>(pr.null), "coefficient shapes need a product null");
    const auto& null = std::get<ProductNull>(pr.null);
    CorrelationEngine eng(pr);
    std::vector<CoeffShape> shapes;
    for (const auto& alt : pr.prior.alternates) {
        if (std::holds_alternative<ParityAlternate>(alt)) {
            const auto& p = std::get<ParityAlternate>(alt);
            shapes.push_back(SingleCharCoeffs{p.mask, p.amplitude});
        } else if (std::holds_alternative<ProductAlternate>(alt)) {
            auto view = eng.view(alt);
            ScaledProductCoeffs c;
            for (int i = 0; i < null.dimension(); ++i) {
                require(view.prod_coeff[std::size_t(i)].size() == 1,
                        "coefficient shapes need binary coordinates");
                c.g.push_back(view.prod_coeff[std::size_t(i)][0]);
            }
            shapes.push_back(std::move(c));
        } else {
            throw std::invalid_argument("coefficient shapes: unsupported alternate kind");
        }
    }
    return shapes;
}

}  // namespace ldsq
