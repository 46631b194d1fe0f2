#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/rng.hpp"

namespace ldsq {

// One-shot <-> multi-sample reductions: Gaussian orthogonal-rotation cloning
// and Bernoulli / planted-clique cloning.

struct CloneConfig {
    int m = 1;
    std::optional<double> gamma;  // Bernoulli base density; absent for Gaussian
    std::uint64_t seed = 0;

    void validate() const {
        require(m >= 1, "CloneConfig: m must be >= 1");
        if (gamma) require(*gamma > 0.0 && *gamma < 1.0, "CloneConfig: gamma must lie in (0,1)");
    }
};

// ============================================================================
// Gaussian cloning: x ~ N(mu, 1) -> m i.i.d. N(mu/sqrt(m), 1)
// ============================================================================

// Householder reflection with first column exactly 1/sqrt(m).
inline Eigen::MatrixXd gaussian_clone_matrix(int m) {
    require(m >= 1, "gaussian_clone_matrix: m must be >= 1");
    Eigen::MatrixXd u = Eigen::MatrixXd::Identity(m, m);
    if (m == 1) return u;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(double(m)));
    Eigen::VectorXd v = -w;
    v(0) += 1.0;  // v = e1 - w
    u -= (2.0 / v.squaredNorm()) * v * v.transpose();
    return u;
}

namespace detail {

// The sufficient statistic sum(y)/sqrt(m) is accumulated in extended
// precision: the double grid at scale sqrt(m)*x is coarser than the grid at
// x, so a plain double sum cannot always reproduce x bitwise.
inline double scaled_sum(const std::vector<double>& y) {
    long double s = 0.0L;
    for (double v : y) s += v;
    return double(s / std::sqrt((long double)(y.size())));
}

}  // namespace detail

namespace detail {

inline std::vector<double> gaussian_clone_once(double x, int m, RngStream& rng) {
    std::vector<double> z(std::size_t(m), 0.0);
    z[0] = x;
    for (int i = 1; i < m; ++i) z[std::size_t(i)] = rng.gaussian();
    // Householder reflection sending e1 to the all-ones direction
    const double root_m = std::sqrt(double(m));
    const double w = 1.0 / root_m;
    std::vector<double> v(std::size_t(m), -w);
    v[0] += 1.0;
    double vv = 0.0, vz = 0.0;
    for (int i = 0; i < m; ++i) {
        vv += v[std::size_t(i)] * v[std::size_t(i)];
        vz += v[std::size_t(i)] * z[std::size_t(i)];
    }
    const double c = 2.0 * vz / vv;
    std::vector<double> y(std::size_t(m), 0.0);
    for (int i = 0; i < m; ++i) y[std::size_t(i)] = z[std::size_t(i)] - c * v[std::size_t(i)];
    // snap the sufficient statistic so unclone reproduces x bitwise when the
    // double lattice admits it: coarse correction on the last entry, then ulp
    // steps on the entry with the finest grid
    for (int it = 0; it < 8; ++it) {
        const double err = scaled_sum(y) - x;
        if (err == 0.0) break;
        y[std::size_t(m - 1)] -= err * root_m;
    }
    std::size_t fine = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (std::abs(y[i]) < std::abs(y[fine])) fine = i;
    for (int it = 0; it < 256; ++it) {
        const double got = scaled_sum(y);
        if (got == x) break;
        y[fine] = std::nextafter(y[fine], got > x ? -std::numeric_limits<double>::infinity()
                                                  : std::numeric_limits<double>::infinity());
    }
    return y;
}

}  // namespace detail

// The snap inside gaussian_clone_once perturbs one coordinate by a few ulps
// and is applied unconditionally, so the output law is not distorted. The
// round trip is bitwise exact whenever the double lattice of sum(y) can
// represent sqrt(m)*x at x's own resolution, which fails only for |x| far
// below the per-sample noise scale.
inline std::vector<double> gaussian_clone(double x, const CloneConfig& cfg) {
    cfg.validate();
    if (cfg.m == 1) return {x};
    RngStream rng(cfg.seed);
    return detail::gaussian_clone_once(x, cfg.m, rng);
}

inline double gaussian_unclone(const std::vector<double>& y) {
    require(!y.empty(), "gaussian_unclone: empty input");
    return detail::scaled_sum(y);
}

// ============================================================================
// Bernoulli cloning: x ~ Ber(p), p in {gamma, 1} -> m i.i.d. Ber(p^{1/m})
// ============================================================================

// Support-size pmf for the x = 0 branch, computed in log space: gamma^{1/m}
// near 1 makes (1 - gamma^{1/m}) cancel, so it goes through expm1/log1p.
inline std::vector<double> bernoulli_clone_support_pmf(double gamma, int m) {
    require(gamma > 0.0 && gamma < 1.0, "bernoulli_clone: gamma out of range");
    const double lg = std::log(gamma);
    const double log_one_minus_root = std::log(-std::expm1(lg / m));
    const double log_one_minus_gamma = std::log1p(-gamma);
    std::vector<double> pmf(std::size_t(m), 0.0);
    CompensatedSum total;
    for (int l = 0; l < m; ++l) {
        const double lp = std::log(binomial(std::uint64_t(m), std::uint64_t(l))) + (double(l) / m) * lg +
                          double(m - l) * log_one_minus_root - log_one_minus_gamma;
        pmf[std::size_t(l)] = std::exp(lp);
        total.add(pmf[std::size_t(l)]);
    }
    const double norm = total.value();
    for (auto& p : pmf) p /= norm;
    return pmf;
}

inline std::vector<std::uint8_t> bernoulli_clone(std::uint8_t x, const CloneConfig& cfg) {
    cfg.validate();
    require(cfg.gamma.has_value(), "bernoulli_clone: gamma required");
    const int m = cfg.m;
    if (x) return std::vector<std::uint8_t>(std::size_t(m), 1);
    auto pmf = bernoulli_clone_support_pmf(*cfg.gamma, m);
    RngStream rng(cfg.seed);
    // inverse-CDF draw of the support size
    const double u = rng.uniform();
    int size = m - 1;
    double acc = 0.0;
    for (int l = 0; l < m; ++l) {
        acc += pmf[std::size_t(l)];
        if (u < acc) {
            size = l;
            break;
        }
    }
    // uniform arrangement: partial Fisher-Yates over positions
    std::vector<int> pos(std::size_t(m), 0);
    for (int i = 0; i < m; ++i) pos[std::size_t(i)] = i;
    std::vector<std::uint8_t> y(std::size_t(m), 0);
    for (int i = 0; i < size; ++i) {
        const std::uint64_t j = i + rng.below(std::uint64_t(m - i));
        std::swap(pos[std::size_t(i)], pos[std::size_t(j)]);
        y[std::size_t(pos[std::size_t(i)])] = 1;
    }
    return y;
}

// ============================================================================
// Hypergraph instances (planted clique cloning)
// ============================================================================

// s-uniform hyperedge indicators over [n], row-major C(n,s) ordering by
// colexicographic subset rank.
struct HyperedgeBitmap {
    int n = 0;
    int s = 2;
    std::vector<std::uint8_t> edges;

    static HyperedgeBitmap empty(int n, int s) {
        HyperedgeBitmap b;
        b.n = n;
        b.s = s;
        b.edges.assign(std::size_t(binomial(std::uint64_t(n), std::uint64_t(s))), 0);
        return b;
    }
    static HyperedgeBitmap complete(int n, int s) {
        auto b = empty(n, s);
        std::fill(b.edges.begin(), b.edges.end(), std::uint8_t(1));
        return b;
    }
};

inline std::vector<HyperedgeBitmap> pc_clone(const HyperedgeBitmap& g, const CloneConfig& cfg) {
    cfg.validate();
    require(cfg.gamma.has_value(), "pc_clone: gamma required");
    std::vector<HyperedgeBitmap> out(std::size_t(cfg.m), HyperedgeBitmap::empty(g.n, g.s));
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        CloneConfig edge_cfg = cfg;
        edge_cfg.seed = derive_seed(cfg.seed, e);
        auto bits = bernoulli_clone(g.edges[e], edge_cfg);
        for (int i = 0; i < cfg.m; ++i) out[std::size_t(i)].edges[e] = bits[std::size_t(i)];
    }
    return out;
}

inline HyperedgeBitmap pc_unclone(const std::vector<HyperedgeBitmap>& gs) {
    require(!gs.empty(), "pc_unclone: empty input");
    HyperedgeBitmap out = gs[0];
    for (std::size_t i = 1; i < gs.size(); ++i) {
        require(gs[i].n == out.n && gs[i].s == out.s && gs[i].edges.size() == out.edges.size(),
                "pc_unclone: shape mismatch");
        for (std::size_t e = 0; e < out.edges.size(); ++e) out.edges[e] &= gs[i].edges[e];
    }
    return out;
}

// --- bitmap file i/o: text header "n s" then one line of 0/1 per edge -------

inline void write_hyperedge_bitmap(const std::string& path, const HyperedgeBitmap& g) {
    std::ofstream out(path);
    require(bool(out), "cannot open " + path + " for writing");
    out << g.n << " " << g.s << "\n";
    for (std::size_t e = 0; e < g.edges.size(); ++e) out << int(g.edges[e]);
    out << "\n";
}

inline HyperedgeBitmap read_hyperedge_bitmap(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), "cannot open " + path);
    HyperedgeBitmap g;
    in >> g.n >> g.s;
    std::string bits;
    in >> bits;
    const std::size_t expect = std::size_t(binomial(std::uint64_t(g.n), std::uint64_t(g.s)));
    require(bits.size() == expect, "hyperedge bitmap length mismatch");
    g.edges.resize(expect);
    for (std::size_t e = 0; e < expect; ++e) {
        require(bits[e] == '0' || bits[e] == '1', "hyperedge bitmap must be 0/1");
        g.edges[e] = std::uint8_t(bits[e] - '0');
    }
    return g;
}

}  // namespace ldsq
