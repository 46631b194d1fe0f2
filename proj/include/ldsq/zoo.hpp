#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/measures.hpp"
#include "ldsq/rng.hpp"

namespace ldsq {

// Constructors for the example problems, each with the closed-form
// correlation structure it must satisfy.

struct ZooInstance {
    std::string id;
    TestingProblem problem;
    std::map<std::string, double> params;
    std::optional<PairSpectrum> spectrum;  // collapsed-class closed form
    // prsGGM sampler statistics
    double sampler_acceptance_rate = 1.0;
};

inline const PairSpectrum& spectrum_of(const ZooInstance& z) {
    require(z.spectrum.has_value(), "zoo instance has no closed-form spectrum");
    return *z.spectrum;
}

// ============================================================================
// Tensor PCA: D_u = N(lambda u^{(x)r}, Id), u uniform over {+-1/sqrt(n)}^n
// ============================================================================

// <mu_u, mu_v> = lambda^2 <u,v>^r; the overlap <u,v> = (n - 2b)/n with
// b ~ Bin(n, 1/2) under independent prior draws.
inline ZooInstance make_tensor_pca(int n, int r, double lambda, bool exact_prior = true,
                                   std::uint64_t seed = 0) {
    require(n >= 1 && r >= 1, "make_tensor_pca: need n, r >= 1");
    ZooInstance z;
    z.id = "tensor-pca-n" + std::to_string(n) + "-r" + std::to_string(r);
    z.params = {{"n", double(n)}, {"r", double(r)}, {"lambda", lambda}};

    auto overlap = [n](std::uint64_t a, std::uint64_t b) {
        const int disagree = __builtin_popcountll((a ^ b) & ((n >= 64) ? ~0ULL : ((1ULL << n) - 1)));
        return double(n - 2 * disagree) / double(n);
    };
    auto corr = [lambda, r, overlap](const Alternate& a, const Alternate& b, Degree d) {
        const auto la = std::get<LabelAlternate>(a).label;
        const auto lb = std::get<LabelAlternate>(b).label;
        const double ov = overlap(std::uint64_t(la), std::uint64_t(lb));
        return exp_truncated(lambda * lambda * std::pow(ov, r), d);
    };

    TestingProblem pr;
    pr.id = z.id;
    long long dim = 1;
    for (int i = 0; i < r; ++i) dim *= n;
    pr.null = GaussianNull{int(dim)};
    pr.closed_form = corr;
    if (exact_prior) {
        require(n <= 14, "make_tensor_pca: exact prior requires 2^n <= 2^14");
        std::vector<Alternate> alts;
        for (std::uint64_t u = 0; u < (1ULL << n); ++u) alts.push_back(LabelAlternate{std::int64_t(u)});
        pr.prior = Prior::uniform(std::move(alts));
    } else {
        pr.prior = Prior::sampled(
            [n](RngStream& rng) {
                std::uint64_t u = rng.bits();
                if (n < 64) u &= (1ULL << n) - 1;
                return Alternate(LabelAlternate{std::int64_t(u)});
            },
            seed);
    }
    z.problem = std::move(pr);

    // binomial overlap classes
    std::vector<double> w;
    auto values = std::make_shared<std::vector<double>>();
    for (int b = 0; b <= n; ++b) {
        w.push_back(binomial(std::uint64_t(n), std::uint64_t(b)) * std::pow(0.5, n));
        values->push_back(double(n - 2 * b) / double(n));
    }
    z.spectrum = PairSpectrum(std::move(w), [lambda, r, values](std::size_t i, Degree d) {
        return exp_truncated(lambda * lambda * std::pow((*values)[i], r), d);
    });
    return z;
}

// ============================================================================
// Multi-sample hypergraph planted clique
// ============================================================================

namespace detail {

inline std::vector<std::vector<int>> subsets_of_size(int n, int s) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(std::size_t(s), 0);
    for (int i = 0; i < s; ++i) cur[std::size_t(i)] = i;
    for (;;) {
        out.push_back(cur);
        int i = 0;
        while (i + 1 < s && cur[std::size_t(i)] + 1 == cur[std::size_t(i + 1)]) ++i;
        ++cur[std::size_t(i)];
        if (cur[std::size_t(s - 1)] >= n) break;
        for (int j = 0; j < i; ++j) cur[std::size_t(j)] = j;
    }
    return out;
}

}  // namespace detail

// <Dbar_u^{<=d}, Dbar_v^{<=d}> for hypergraph PC: shared hyperedges contribute
// binomially in the edge characters.
inline double hpc_low_degree_correlation(int shared_edges, double q, Degree d) {
    const double gamma = (1.0 - q) / q;
    if (d.is_unbounded()) return std::pow(1.0 + gamma, shared_edges);  // = q^{-E}
    double acc = 1.0;
    double term = 1.0;
    const int top = std::min(d.value(), shared_edges);
    for (int l = 1; l <= top; ++l) {
        term *= gamma * double(shared_edges - l + 1) / double(l);
        acc += term;
    }
    return acc;
}

inline ZooInstance make_multisample_hpc(int n_vertices, int clique, int s, double q) {
    require(clique <= n_vertices, "make_multisample_hpc: K > N");
    require(s >= 2 && clique >= s, "make_multisample_hpc: need K >= s >= 2");
    require(q > 0.0 && q < 1.0, "make_multisample_hpc: q must lie in (0,1)");
    const double n_edges_f = binomial(std::uint64_t(n_vertices), std::uint64_t(s));
    const double n_cliques_f = binomial(std::uint64_t(n_vertices), std::uint64_t(clique));

    ZooInstance z;
    z.id = "hpc-n" + std::to_string(n_vertices) + "-k" + std::to_string(clique) + "-s" +
           std::to_string(s);
    z.params = {{"N", double(n_vertices)}, {"K", double(clique)}, {"s", double(s)}, {"q", q}};

    TestingProblem pr;
    pr.id = z.id;
    if (n_edges_f <= double(1 << 20) && n_cliques_f <= 200000.0) {
        // tabulated product alternates over the hyperedge indicators
        const int n_edges = int(n_edges_f);
        auto edges = detail::subsets_of_size(n_vertices, s);
        pr.null = ProductNull::bernoulli(n_edges, q);
        auto cliques = detail::subsets_of_size(n_vertices, clique);
        std::vector<Alternate> alts;
        for (const auto& verts : cliques) {
            std::uint64_t vm = 0;
            for (int v : verts) vm |= 1ULL << v;
            ProductAlternate a;
            for (const auto& e : edges) {
                bool inside = true;
                for (int v : e)
                    if (!(vm >> v & 1ULL)) inside = false;
                a.coord_probs.push_back(inside ? std::vector<double>{0.0, 1.0}
                                               : std::vector<double>{1.0 - q, q});
            }
            alts.push_back(std::move(a));
        }
        pr.prior = Prior::uniform(std::move(alts));
    } else {
        // closed-form correlations on vertex-subset labels, sampled prior
        require(n_vertices <= 63, "make_multisample_hpc: closed-form route needs N <= 63");
        pr.null = GaussianNull{0};  // placeholder; all pair structure is closed form
        const int nv = n_vertices, kq = clique;
        pr.prior = Prior::sampled(
            [nv, kq](RngStream& rng) {
                std::uint64_t mask = 0;
                std::vector<int> verts(std::size_t(nv), 0);
                for (int i = 0; i < nv; ++i) verts[std::size_t(i)] = i;
                for (int i = 0; i < kq; ++i) {
                    std::swap(verts[std::size_t(i)],
                              verts[std::size_t(i + int(rng.below(std::uint64_t(nv - i))))]);
                    mask |= 1ULL << verts[std::size_t(i)];
                }
                return Alternate(LabelAlternate{std::int64_t(mask)});
            },
            0);
        pr.closed_form = [q, s](const Alternate& a, const Alternate& b, Degree d) {
            const auto ua = std::uint64_t(std::get<LabelAlternate>(a).label);
            const auto ub = std::uint64_t(std::get<LabelAlternate>(b).label);
            const int ov = __builtin_popcountll(ua & ub);
            const int shared = ov >= s ? int(binomial(std::uint64_t(ov), std::uint64_t(s))) : 0;
            return hpc_low_degree_correlation(shared, q, d);
        };
    }
    z.problem = std::move(pr);

    // hypergeometric overlap classes: X = |u cap v|
    std::vector<double> w;
    auto shared = std::make_shared<std::vector<int>>();
    const double denom = binomial(std::uint64_t(n_vertices), std::uint64_t(clique));
    for (int x = std::max(0, 2 * clique - n_vertices); x <= clique; ++x) {
        w.push_back(binomial(std::uint64_t(clique), std::uint64_t(x)) *
                    binomial(std::uint64_t(n_vertices - clique), std::uint64_t(clique - x)) / denom);
        shared->push_back(x >= s ? int(binomial(std::uint64_t(x), std::uint64_t(s))) : 0);
    }
    z.spectrum = PairSpectrum(std::move(w), [q, shared](std::size_t i, Degree d) {
        return hpc_low_degree_correlation((*shared)[i], q, d);
    });
    return z;
}

// ============================================================================
// Bipartite planted dense subgraph (one column per sample)
// ============================================================================

// D_u = beta D'_u + (1 - beta) Ber(q)^N with beta = K/N, so
// <Dbar_u, Dbar_v> - 1 = beta^2 ((1+gamma)^{|u cap v|} - 1),
// gamma = (p - q)^2 / (q (1-q)).
inline double bpds_low_degree_correlation(int ov, double beta, double gamma, Degree d) {
    double inner;  // sum_{1 <= l <= min(d, ov)} C(ov, l) gamma^l
    if (d.is_unbounded()) {
        inner = std::pow(1.0 + gamma, ov) - 1.0;
    } else {
        inner = 0.0;
        double term = 1.0;
        const int top = std::min(d.value(), ov);
        for (int l = 1; l <= top; ++l) {
            term *= gamma * double(ov - l + 1) / double(l);
            inner += term;
        }
    }
    return 1.0 + beta * beta * inner;
}

// dense materialization of one bipartite alternate (for brute-force checks)
inline DenseAlternate bpds_dense_alternate(int n, double p, double q, std::uint64_t u_mask,
                                           double beta) {
    DenseAlternate out;
    out.probs.resize(1ULL << n);
    for (std::uint64_t x = 0; x < (1ULL << n); ++x) {
        double planted = 1.0, noise = 1.0;
        for (int i = 0; i < n; ++i) {
            const bool one = x >> i & 1ULL;
            const double pi = (u_mask >> i & 1ULL) ? p : q;
            planted *= one ? pi : 1.0 - pi;
            noise *= one ? q : 1.0 - q;
        }
        out.probs[x] = beta * planted + (1.0 - beta) * noise;
    }
    return out;
}

inline ZooInstance make_bipartite_pds(int n, int clique, double p, double q) {
    require(clique <= n, "make_bipartite_pds: K > N");
    require(q > 0.0 && q < 1.0 && p > q && p <= 1.0, "make_bipartite_pds: need 0 < q < p <= 1");
    require(n <= 16, "make_bipartite_pds: explicit prior needs N <= 16");
    const double beta = double(clique) / double(n);
    const double gamma = (p - q) * (p - q) / (q * (1.0 - q));

    ZooInstance z;
    z.id = "bpds-n" + std::to_string(n) + "-k" + std::to_string(clique);
    z.params = {{"N", double(n)}, {"K", double(clique)}, {"p", p}, {"q", q}};

    TestingProblem pr;
    pr.id = z.id;
    pr.null = ProductNull::bernoulli(n, q);
    std::vector<Alternate> alts;
    std::vector<double> wts;
    for (std::uint64_t u = 0; u < (1ULL << n); ++u) {
        alts.push_back(LabelAlternate{std::int64_t(u)});
        const int bits = __builtin_popcountll(u);
        wts.push_back(std::pow(beta, bits) * std::pow(1.0 - beta, n - bits));
    }
    pr.prior = Prior::weighted(std::move(alts), std::move(wts));
    pr.closed_form = [beta, gamma](const Alternate& a, const Alternate& b, Degree d) {
        const auto ua = std::uint64_t(std::get<LabelAlternate>(a).label);
        const auto ub = std::uint64_t(std::get<LabelAlternate>(b).label);
        return bpds_low_degree_correlation(__builtin_popcountll(ua & ub), beta, gamma, d);
    };
    z.problem = std::move(pr);

    // |u cap v| ~ Bin(N, beta^2) under independent prior draws
    std::vector<double> w;
    auto ovs = std::make_shared<std::vector<int>>();
    for (int x = 0; x <= n; ++x) {
        w.push_back(binomial(std::uint64_t(n), std::uint64_t(x)) * std::pow(beta * beta, x) *
                    std::pow(1.0 - beta * beta, n - x));
        ovs->push_back(x);
    }
    z.spectrum = PairSpectrum(std::move(w), [beta, gamma, ovs](std::size_t i, Degree d) {
        return bpds_low_degree_correlation((*ovs)[i], beta, gamma, d);
    });
    return z;
}

// Fourier-coefficient route for the bipartite (d,k)-LDLR_m:
// sum over tuples of nonempty subsets with the closed-form Fourier weights
// (K/N)^{2|L(alpha)| + 2t} gamma^{sum |alpha_i|}.
inline double bpds_ldlr_by_coefficients(int n, int clique, double p, double q, long long m, int d,
                                        int k) {
    require(n <= 12 && k <= 3, "bpds_ldlr_by_coefficients: brute enumeration too large");
    const double beta = double(clique) / double(n);
    const double gamma = (p - q) * (p - q) / (q * (1.0 - q));
    const std::uint64_t nm = 1ULL << n;
    CompensatedSum total;
    // t = number of active samples; alpha_i nonempty, |alpha_i| <= d
    std::vector<std::uint64_t> tuple;
    for (int t = 1; t <= k; ++t) {
        const double cmt = binomial(std::uint64_t(m), std::uint64_t(t));
        // iterate ordered tuples by odometer
        tuple.assign(std::size_t(t), 0);
        std::uint64_t count = 1;
        for (int i = 0; i < t; ++i) count *= nm;
        CompensatedSum level;
        for (std::uint64_t code = 0; code < count; ++code) {
            std::uint64_t x = code, lmask = 0;
            int degsum = 0;
            bool ok = true;
            for (int i = 0; i < t && ok; ++i) {
                std::uint64_t a = x % nm;
                x /= nm;
                const int sz = __builtin_popcountll(a);
                if (sz == 0 || sz > d) ok = false;
                lmask |= a;
                degsum += sz;
            }
            if (!ok) continue;
            const int l = __builtin_popcountll(lmask);
            level.add(std::pow(beta, 2.0 * l + 2.0 * t) * std::pow(gamma, degsum));
        }
        total.add(cmt * level.value());
    }
    return total.value();
}

// ============================================================================
// Sparse parity with noise
// ============================================================================

inline ZooInstance make_sparse_parity(int n, int s, const std::vector<std::uint64_t>& parities) {
    ZooInstance z;
    z.id = "sparse-parity-n" + std::to_string(n) + "-s" + std::to_string(s);
    z.params = {{"n", double(n)}, {"s", double(s)}, {"S", double(parities.size())}};
    TestingProblem pr;
    pr.id = z.id;
    pr.null = ProductNull::uniform_hypercube(n);
    std::vector<Alternate> alts;
    for (std::size_t i = 0; i < parities.size(); ++i) {
        require(__builtin_popcountll(parities[i]) == s, "make_sparse_parity: parity must be s-sparse");
        for (std::size_t j = 0; j < i; ++j)
            require(parities[i] != parities[j], "make_sparse_parity: duplicate parities");
        alts.push_back(ParityAlternate{parities[i]});
    }
    pr.prior = Prior::uniform(std::move(alts));
    z.problem = std::move(pr);
    const double inv = 1.0 / double(parities.size());
    z.spectrum = PairSpectrum({inv, 1.0 - inv}, [s](std::size_t i, Degree d) {
        return (i == 0 && d.keeps(s)) ? 2.0 : 1.0;
    });
    return z;
}

// Closed-form spectrum of an s-sparse parity family of a given (possibly
// astronomically large) size, with noise amplitude a: the diagonal class has
// correlation 1 + a^2 above degree s - 1.
inline PairSpectrum parity_family_spectrum(double family_size, int s, double amplitude = 1.0) {
    require(family_size >= 1.0, "parity_family_spectrum: family size must be >= 1");
    const double inv = 1.0 / family_size;
    return PairSpectrum({inv, 1.0 - inv}, [s, amplitude](std::size_t i, Degree d) {
        return (i == 0 && d.keeps(s)) ? 1.0 + amplitude * amplitude : 1.0;
    });
}

// ============================================================================
// Spiked Wishart PCA
// ============================================================================

// phi(x) = (1 - 4x)^{-1/2} = sum_l C(2l, l) x^l; pairwise correlation
// <Dbar_u, Dbar_v> = phi(lambda^2 <u,v>^2 / 4) = (1 - lambda^2 <u,v>^2)^{-1/2}.
inline double wishart_phi_truncated(double x, int top) {
    // sum_{l <= top} C(2l,l) x^l
    double acc = 1.0, term = 1.0;
    for (int l = 1; l <= top; ++l) {
        term *= x * (2.0 * (2.0 * l - 1.0)) / double(l);
        acc += term;
    }
    return acc;
}

// tail sum_{l > top} C(2l,l) x^l summed to convergence (requires 4|x| < 1)
inline double wishart_phi_tail(double x, int top) {
    require(std::abs(4.0 * x) < 1.0, "wishart series requires |4x| < 1");
    double term = 1.0;
    for (int l = 1; l <= top; ++l) term *= x * (2.0 * (2.0 * l - 1.0)) / double(l);
    CompensatedSum acc;
    for (int l = top + 1; l <= top + 400; ++l) {
        term *= x * (2.0 * (2.0 * l - 1.0)) / double(l);
        acc.add(term);
        // geometric tail bound: C(2l,l) <= 4^l
        if (std::abs(term) / (1.0 - std::abs(4.0 * x)) < 1e-25) break;
    }
    return acc.value();
}

struct WishartLaw {
    // collapsed pair classes of the truncated prior: overlap <u,v> and weight
    std::vector<double> weights;
    std::vector<double> overlaps;
};

inline WishartLaw wishart_pair_law(int n, double rho) {
    // per-coordinate joint of (a, b) iid in {0, +-1}: track (na, nb, dot)
    WishartLaw law;
    const int dn = 2 * n + 1;
    std::vector<double> dp(std::size_t((n + 1) * (n + 1) * dn), 0.0);
    auto at = [&](int na, int nb, int dot) -> double& {
        return dp[std::size_t((na * (n + 1) + nb) * dn + dot + n)];
    };
    at(0, 0, 0) = 1.0;
    const double p0 = 1.0 - rho, p1 = rho / 2.0;
    for (int c = 0; c < n; ++c) {
        std::vector<double> next(dp.size(), 0.0);
        auto nx = [&](int na, int nb, int dot) -> double& {
            return next[std::size_t((na * (n + 1) + nb) * dn + dot + n)];
        };
        for (int na = 0; na <= c; ++na)
            for (int nb = 0; nb <= c; ++nb)
                for (int dot = -c; dot <= c; ++dot) {
                    const double w = at(na, nb, dot);
                    if (w == 0.0) continue;
                    nx(na, nb, dot) += w * p0 * p0;                // (0, 0)
                    nx(na + 1, nb, dot) += w * 2.0 * p1 * p0;      // (+-1, 0)
                    nx(na, nb + 1, dot) += w * p0 * 2.0 * p1;      // (0, +-1)
                    nx(na + 1, nb + 1, dot + 1) += w * 2.0 * p1 * p1;  // equal signs
                    nx(na + 1, nb + 1, dot - 1) += w * 2.0 * p1 * p1;  // opposite signs
                }
        dp.swap(next);
    }
    const double cap = 2.0 * rho * double(n);
    std::map<long long, double> classes;  // key: <s'_a, s'_b> after truncation
    for (int na = 0; na <= n; ++na)
        for (int nb = 0; nb <= n; ++nb)
            for (int dot = -n; dot <= n; ++dot) {
                const double w = at(na, nb, dot);
                if (w == 0.0) continue;
                const bool alive = double(na) <= cap && double(nb) <= cap;
                classes[alive ? dot : 0] += w;
            }
    for (const auto& [key, w] : classes) {
        law.weights.push_back(w);
        law.overlaps.push_back(double(key) / (rho * double(n)));
    }
    return law;
}

inline ZooInstance make_spiked_wishart(int n, double rho, double lambda, std::uint64_t seed = 0) {
    require(n >= 1 && rho > 0.0 && rho <= 1.0, "make_spiked_wishart: bad n or rho");
    require(lambda >= 0.0, "make_spiked_wishart: lambda must be nonnegative");
    require(lambda < 0.5, "make_spiked_wishart: lambda >= 1/2 is outside the series radius");
    ZooInstance z;
    z.id = "wishart-n" + std::to_string(n);
    z.params = {{"n", double(n)}, {"rho", rho}, {"lambda", lambda}};

    TestingProblem pr;
    pr.id = z.id;
    pr.null = GaussianNull{n};
    // sampler draws the spike s' in {0,+-1}^n, applies the norm truncation,
    // and hands out the scaled direction; correlations close over the dot
    // product
    const double cap = 2.0 * rho * double(n);
    pr.prior = Prior::sampled(
        [n, rho, cap](RngStream& rng) {
            std::vector<double> u(std::size_t(n), 0.0);
            int nz = 0;
            for (int i = 0; i < n; ++i)
                if (rng.uniform() < rho) {
                    u[std::size_t(i)] = rng.bernoulli(0.5) ? 1.0 : -1.0;
                    ++nz;
                }
            if (double(nz) > cap) std::fill(u.begin(), u.end(), 0.0);
            const double scale = 1.0 / std::sqrt(rho * double(n));
            for (auto& x : u) x *= scale;
            return Alternate(MeanShiftAlternate{u});
        },
        seed);
    const double x_scale = lambda * lambda / 4.0;
    pr.closed_form = [x_scale](const Alternate& a, const Alternate& b, Degree d) {
        const auto& ua = std::get<MeanShiftAlternate>(a).mean;
        const auto& ub = std::get<MeanShiftAlternate>(b).mean;
        const double ov = compensated_dot(ua, ub);
        const double x = x_scale * ov * ov;
        if (d.is_unbounded()) return 1.0 / std::sqrt(1.0 - 4.0 * x);
        return wishart_phi_truncated(x, d.value() / 2);
    };
    z.problem = std::move(pr);

    if (n <= 20) {  // exact pair law by dynamic programming
        auto law = std::make_shared<WishartLaw>(wishart_pair_law(n, rho));
        z.spectrum = PairSpectrum(law->weights, [law, x_scale](std::size_t i, Degree d) {
            const double ov = law->overlaps[i];
            const double x = x_scale * ov * ov;
            if (d.is_unbounded()) return 1.0 / std::sqrt(1.0 - 4.0 * x);
            return wishart_phi_truncated(x, d.value() / 2);
        });
    }
    return z;
}

// || E (Dbar^{>d})^{(x)k} ||^2 by direct tail summation of the phi series at
// each overlap class, with a certified geometric cutoff. Independent of the
// spectrum's truncated-series route.
inline double wishart_high_degree_series(int n, double rho, double lambda, int d, int k) {
    auto law = wishart_pair_law(n, rho);
    const double x_scale = lambda * lambda / 4.0;
    CompensatedSum acc;
    for (std::size_t i = 0; i < law.weights.size(); ++i) {
        const double ov = law.overlaps[i];
        const double tail = wishart_phi_tail(x_scale * ov * ov, d / 2);
        acc.add(law.weights[i] * std::pow(tail, k));
    }
    return acc.value();
}

// prior moment E_u u^beta over the truncated spiked-Wishart prior;
// zero when any entry of beta is odd.
inline double wishart_prior_moment(int n, double rho, const std::vector<int>& beta) {
    int c = 0, total = 0;
    for (int b : beta) {
        require(b >= 0, "wishart_prior_moment: negative exponent");
        if (b % 2 == 1) return 0.0;
        if (b > 0) ++c;
        total += b;
    }
    require(c <= n, "wishart_prior_moment: more active coordinates than n");
    // each active coordinate must be nonzero (s'^even = 1), contributing rho
    // and one unit of ||s'||^2; remaining coordinates binomial
    const double cap = 2.0 * rho * double(n);
    CompensatedSum acc;
    for (int j = 0; c + j <= n; ++j) {
        if (double(c + j) > cap) break;
        acc.add(binomial(std::uint64_t(n - c), std::uint64_t(j)) * std::pow(rho, j) *
                std::pow(1.0 - rho, n - c - j));
    }
    return std::pow(rho, c) * acc.value() * std::pow(rho * double(n), -double(total) / 2.0);
}

// squared Hermite coefficient (E_u <Dbar_u, H_alpha>)^2 of the spiked-Wishart
// likelihood ratio at a multi-index per sample; zero unless every per-sample
// total degree is even.
inline double wishart_hermite_coeff_sq(int n, double rho, double lambda,
                                       const std::vector<std::vector<int>>& alpha) {
    double lam_pow = 0.0;
    double factor = 1.0;
    std::vector<int> beta(std::size_t(n), 0);
    for (const auto& a : alpha) {
        require(int(a.size()) == n, "wishart_hermite_coeff_sq: index dimension mismatch");
        int total = 0;
        for (int j = 0; j < n; ++j) {
            total += a[std::size_t(j)];
            beta[std::size_t(j)] += a[std::size_t(j)];
        }
        if (total % 2 == 1) return 0.0;
        lam_pow += total;
        // (|alpha_i| - 1)!! / alpha_i!
        double dfact = 1.0;
        for (int v = total - 1; v >= 1; v -= 2) dfact *= v;
        double fact = 1.0;
        for (int j = 0; j < n; ++j)
            for (int v = 2; v <= a[std::size_t(j)]; ++v) fact *= v;
        factor *= dfact / fact;
    }
    const double mom = wishart_prior_moment(n, rho, beta);
    return std::pow(lambda, lam_pow) * factor * mom * mom;
}

// ============================================================================
// Gaussian graphical models: planted randomly signed d-regular subgraph
// ============================================================================

inline ZooInstance make_prs_ggm(int n, int s, int d, double kappa, std::uint64_t seed) {
    require(kappa > 0.0 && kappa * std::sqrt(double(d)) < 1.0 / 6.0,
            "make_prs_ggm: requires kappa sqrt(d) < 1/6");
    require(1 <= d && d < s && s <= n, "make_prs_ggm: need 1 <= d < s <= n");
    require((s * d) % 2 == 0, "make_prs_ggm: s*d must be even for a d-regular graph");
    ZooInstance z;
    z.id = "prs-ggm-n" + std::to_string(n) + "-s" + std::to_string(s) + "-d" + std::to_string(d);
    z.params = {{"n", double(n)}, {"s", double(s)}, {"d", double(d)}, {"kappa", kappa}};

    auto stats = std::make_shared<std::pair<std::uint64_t, std::uint64_t>>(0, 0);  // accepts, tries
    auto sampler = [n, s, d, kappa, stats](RngStream& rng) -> Alternate {
        for (int attempt = 0; attempt < 20000; ++attempt) {
            ++stats->second;
            // uniform s-subset by partial shuffle
            std::vector<int> verts(std::size_t(n), 0);
            for (int i = 0; i < n; ++i) verts[std::size_t(i)] = i;
            for (int i = 0; i < s; ++i)
                std::swap(verts[std::size_t(i)], verts[std::size_t(i + int(rng.below(std::uint64_t(n - i))))]);
            // configuration model: pair s*d half-edges uniformly
            std::vector<int> stubs;
            for (int v = 0; v < s; ++v)
                for (int j = 0; j < d; ++j) stubs.push_back(v);
            for (std::size_t i = 0; i + 1 < stubs.size(); ++i)
                std::swap(stubs[i], stubs[i + rng.below(std::uint64_t(stubs.size() - i))]);
            Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(s, s);
            bool simple = true;
            for (std::size_t i = 0; i + 1 < stubs.size() && simple; i += 2) {
                const int a = stubs[i], b = stubs[i + 1];
                if (a == b || adj(a, b) != 0.0) simple = false;
                adj(a, b) = adj(b, a) = 1.0;
            }
            if (!simple) continue;
            // random signs
            for (int i = 0; i < s; ++i)
                for (int j = i + 1; j < s; ++j)
                    if (adj(i, j) != 0.0 && rng.bernoulli(0.5)) adj(i, j) = adj(j, i) = -1.0;
            // spectral condition |eig| <= 2 sqrt(d)
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(adj, Eigen::EigenvaluesOnly);
            const double top = std::max(std::abs(es.eigenvalues().minCoeff()),
                                        std::abs(es.eigenvalues().maxCoeff()));
            if (top > 2.0 * std::sqrt(double(d))) continue;
            ++stats->first;
            Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, n);
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j)
                    delta(verts[std::size_t(i)], verts[std::size_t(j)]) = kappa * adj(i, j);
            return CovarianceAlternate{delta};
        }
        throw std::runtime_error("make_prs_ggm: rejection budget exhausted (acceptance rate " +
                                 std::to_string(double(stats->first) / double(stats->second)) + ")");
    };
    TestingProblem pr;
    pr.id = z.id;
    pr.null = GaussianNull{n};
    pr.prior = Prior::sampled(sampler, seed);
    z.problem = std::move(pr);
    return z;
}

// ============================================================================
// SDA vs product-SDA gap construction
// ============================================================================

struct SdaCounterexample {
    ZooInstance instance;
    Eigen::MatrixXd gram;       // <v_i, v_j> = M_ij
    double v_max = 0.0;         // max |entry| over the factor columns
    double alpha_sq = 0.0;      // max_i <v_i, 1>^2 / n
    CorrelationAtoms atoms;     // exact signed pair atoms
};

inline SdaCounterexample make_sda_counterexample(int n, std::uint64_t seed) {
    require(n >= 2 && n <= 4096, "make_sda_counterexample: n out of range");
    for (int attempt = 0; attempt < 10; ++attempt) {
        RngStream rng(derive_seed(seed, std::uint64_t(attempt)));
        Eigen::MatrixXd g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) g(i, j) = g(j, i) = rng.gaussian();
        Eigen::MatrixXd m = g + 3.0 * std::sqrt(double(n)) * Eigen::MatrixXd::Identity(n, n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        if (es.eigenvalues().minCoeff() <= 0.0) continue;
        Eigen::MatrixXd sqrt_m = es.operatorSqrt();
        // Haar rotation keeps the Gram matrix and spreads the factor entries
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = rng.gaussian();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd qmat = qr.householderQ();
        Eigen::MatrixXd rmat = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < n; ++i)
            if (rmat(i, i) < 0.0) qmat.col(i) = -qmat.col(i);
        Eigen::MatrixXd v = qmat * sqrt_m;  // columns v_i

        const double vmax = v.cwiseAbs().maxCoeff();
        Eigen::VectorXd colsum = v.colwise().sum();
        Eigen::MatrixXd w = v - Eigen::VectorXd::Ones(n) * (colsum.transpose() / double(n));
        // densities Dbar_i(k) = (w_ik + 2 vmax) / (2 vmax) must be nonnegative
        if ((w.array() + 2.0 * vmax).minCoeff() < 0.0) continue;

        SdaCounterexample out;
        out.gram = v.transpose() * v;
        out.v_max = vmax;
        out.alpha_sq = colsum.array().square().maxCoeff() / double(n);

        ZooInstance z;
        z.id = "sda-counterexample-n" + std::to_string(n);
        z.params = {{"n", double(n)}, {"seed", double(seed)}};
        TestingProblem pr;
        pr.id = z.id;
        CoordinateMarginal alphabet;
        for (int k = 0; k < n; ++k) {
            alphabet.symbols.push_back(double(k));
            alphabet.probs.push_back(1.0 / double(n));
        }
        pr.null = ProductNull({alphabet});
        std::vector<Alternate> alts;
        for (int i = 0; i < n; ++i) {
            DenseAlternate alt;
            alt.probs.resize(std::size_t(n));
            for (int k = 0; k < n; ++k)
                alt.probs[std::size_t(k)] = (w(k, i) + 2.0 * vmax) / (2.0 * vmax * double(n));
            alts.push_back(std::move(alt));
        }
        pr.prior = Prior::uniform(std::move(alts));
        z.problem = std::move(pr);
        out.instance = std::move(z);
        out.atoms = correlation_atoms(out.instance.problem, AtomsMode::Exact);
        return out;
    }
    throw std::runtime_error("make_sda_counterexample: no PSD draw within the attempt budget");
}

}  // namespace ldsq
