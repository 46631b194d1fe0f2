#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ldsq/ldlr.hpp"
#include "ldsq/sda.hpp"
#include "ldsq/zoo.hpp"

using namespace ldsq;

// ---------------------------------------------------------------------------
// tensor PCA
// ---------------------------------------------------------------------------

TEST(TensorPca, ZeroSignalHasZeroLdlr) {
    auto z = make_tensor_pca(6, 3, 0.0);
    auto rep = ldlr_norm(spectrum_of(z), 8, SamplewiseDegree(Degree(1), 2));
    EXPECT_NEAR(rep.squared_norm, 0.0, 1e-15);
}

TEST(TensorPca, SpectrumMatchesExplicitLabelPrior) {
    auto z = make_tensor_pca(5, 3, 0.3);
    auto sp_closed = spectrum_of(z);
    auto sp_explicit = exact_spectrum(z.problem);
    for (Degree d : {Degree::unbounded(), Degree(1), Degree(3)}) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < sp_closed.count(); ++i)
            a += sp_closed.weight(i) * std::pow(sp_closed.correlation(i, d) - 1.0, 2);
        for (std::size_t i = 0; i < sp_explicit.count(); ++i)
            b += sp_explicit.weight(i) * std::pow(sp_explicit.correlation(i, d) - 1.0, 2);
        EXPECT_NEAR(a, b, 1e-12);
    }
}

TEST(TensorPca, ClosedFormMatchesMeanShiftBackend) {
    // materialize mu_u = lambda u^{(x)r} and compare exp(<mu_u, mu_v>)
    const int n = 3, r = 2;
    const double lambda = 0.45;
    auto z = make_tensor_pca(n, r, lambda);
    TestingProblem gm;
    gm.null = GaussianNull{n * n};
    std::vector<Alternate> alts;
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
        std::vector<double> u(std::size_t(n), 0.0);
        for (int i = 0; i < n; ++i) u[std::size_t(i)] = (mask >> i & 1ULL) ? 1.0 : -1.0;
        for (auto& v : u) v /= std::sqrt(double(n));
        std::vector<double> mu;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) mu.push_back(lambda * u[std::size_t(i)] * u[std::size_t(j)]);
        alts.push_back(MeanShiftAlternate{mu});
    }
    gm.prior = Prior::uniform(alts);
    CorrelationEngine eng(gm);
    for (std::uint64_t a = 0; a < (1ULL << n); ++a)
        for (std::uint64_t b = 0; b < (1ULL << n); ++b) {
            double closed = z.problem.closed_form(LabelAlternate{std::int64_t(a)},
                                                  LabelAlternate{std::int64_t(b)}, Degree::unbounded());
            double direct = eng.correlation(gm.prior.alternates[a], gm.prior.alternates[b],
                                            Degree::unbounded());
            EXPECT_NEAR(closed, direct, 1e-12);
        }
}

TEST(TensorPca, KSampleLrWithinClaimBound) {
    const int n = 6, r = 3, k = 2;
    const double lambda = 0.5 * std::sqrt(double(n) / (2.0 * k));
    auto z = make_tensor_pca(n, r, lambda);
    auto lr = k_sample_lr_norm(spectrum_of(z), k);
    const double bound = std::sqrt(2.0 * M_PI / (1.0 - 2.0 * k * lambda * lambda / n));
    EXPECT_LE(lr.uncentered, bound);
}

// ---------------------------------------------------------------------------
// hypergraph planted clique
// ---------------------------------------------------------------------------

TEST(MultisampleHpc, ClosedFormMatchesDenseBruteForce) {
    const int n = 5, clique = 3, s = 2;
    const double q = 0.5;
    auto z = make_multisample_hpc(n, clique, s, q);
    CorrelationEngine eng(z.problem);
    const auto& alts = z.problem.prior.alternates;
    auto cliques = detail::subsets_of_size(n, clique);
    for (std::size_t a = 0; a < alts.size(); ++a)
        for (std::size_t b = a; b < alts.size(); ++b) {
            int ov = 0;
            for (int x : cliques[a]) ov += std::count(cliques[b].begin(), cliques[b].end(), x);
            const double closed =
                ov >= s ? std::pow(q, -binomial(std::uint64_t(ov), std::uint64_t(s))) : 1.0;
            EXPECT_NEAR(eng.correlation(alts[a], alts[b], Degree::unbounded()), closed, 1e-10);
        }
}

TEST(MultisampleHpc, SmallOverlapGivesTrivialCorrelation) {
    auto z = make_multisample_hpc(6, 2, 2, 0.5);
    const auto& alts = z.problem.prior.alternates;
    EXPECT_NEAR(inner_product(alts[0], alts.back(), z.problem), 1.0, 1e-12);
}

TEST(MultisampleHpc, SpectrumMatchesExplicitEnumeration) {
    auto z = make_multisample_hpc(6, 3, 2, 0.75);
    auto a = atoms_of(spectrum_of(z));
    auto b = correlation_atoms(z.problem, AtomsMode::Exact);
    double ea = 0.0, eb = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        ea += a.weights[i] * a.values[i];
        sa += a.weights[i] * a.values[i] * a.values[i];
    }
    for (std::size_t i = 0; i < b.values.size(); ++i) {
        eb += b.weights[i] * b.values[i];
        sb += b.weights[i] * b.values[i] * b.values[i];
    }
    EXPECT_NEAR(ea, eb, 1e-10);
    EXPECT_NEAR(sa, sb, 1e-10);
}

TEST(MultisampleHpc, RejectsCliqueLargerThanGraph) {
    EXPECT_THROW(make_multisample_hpc(4, 5, 2, 0.5), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// bipartite planted dense subgraph
// ---------------------------------------------------------------------------

TEST(BipartitePds, ClosedFormMatchesDenseMixture) {
    const int n = 5, clique = 2;
    const double p = 0.9, q = 0.4;
    auto z = make_bipartite_pds(n, clique, p, q);
    const double beta = double(clique) / n;
    TestingProblem dense;
    dense.null = ProductNull::bernoulli(n, q);
    std::vector<Alternate> alts;
    for (std::uint64_t u = 0; u < (1ULL << n); ++u)
        alts.push_back(bpds_dense_alternate(n, p, q, u, beta));
    dense.prior = Prior::weighted(alts, z.problem.prior.weights);
    CorrelationEngine eng(dense);
    for (std::uint64_t a = 0; a < (1ULL << n); a += 3)
        for (std::uint64_t b = a; b < (1ULL << n); b += 5) {
            double closed = z.problem.closed_form(LabelAlternate{std::int64_t(a)},
                                                  LabelAlternate{std::int64_t(b)}, Degree::unbounded());
            double direct =
                eng.correlation(dense.prior.alternates[a], dense.prior.alternates[b], Degree::unbounded());
            EXPECT_NEAR(closed, direct, 1e-10);
        }
}

TEST(BipartitePds, CoefficientFormulaMatchesBruteForceLdlr) {
    const int n = 5, clique = 2;
    const double p = 1.0, q = 0.5;  // bipartite planted clique
    auto z = make_bipartite_pds(n, clique, p, q);
    const double beta = double(clique) / n;
    TestingProblem dense;
    dense.null = ProductNull::bernoulli(n, q);
    std::vector<Alternate> alts;
    for (std::uint64_t u = 0; u < (1ULL << n); ++u)
        alts.push_back(bpds_dense_alternate(n, p, q, u, beta));
    dense.prior = Prior::weighted(alts, z.problem.prior.weights);
    const long long m = 2;
    for (int d : {1, 2})
        for (int k : {1, 2}) {
            double coeff_route = bpds_ldlr_by_coefficients(n, clique, p, q, m, d, k);
            double brute = brute_force_ldlr(dense, m, SamplewiseDegree(Degree(d), k));
            EXPECT_NEAR(coeff_route, brute, 1e-10) << "d=" << d << " k=" << k;
        }
}

TEST(BipartitePds, SpectrumMatchesExplicitPairLaw) {
    auto z = make_bipartite_pds(6, 3, 0.8, 0.3);
    auto atoms_closed = atoms_of(spectrum_of(z));
    auto atoms_explicit = correlation_atoms(z.problem, AtomsMode::Exact);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < atoms_closed.values.size(); ++i)
        m1 += atoms_closed.weights[i] * atoms_closed.values[i];
    for (std::size_t i = 0; i < atoms_explicit.values.size(); ++i)
        m2 += atoms_explicit.weights[i] * atoms_explicit.values[i];
    EXPECT_NEAR(m1, m2, 1e-12);
}

// ---------------------------------------------------------------------------
// sparse parity
// ---------------------------------------------------------------------------

TEST(SparseParity, LowDegreeLdlrVanishesExactly) {
    auto z = make_sparse_parity(6, 2, {0b11, 0b110, 0b1100, 0b11000});
    auto rep = ldlr_norm(spectrum_of(z), 8, SamplewiseDegree(Degree(1), 3));
    EXPECT_EQ(rep.squared_norm, 0.0);  // no Fourier mass below degree s
}

TEST(SparseParity, KSampleLrAtMostTwo) {
    const int k = 3;
    std::vector<std::uint64_t> masks;
    for (int i = 0; i < (1 << k); ++i) masks.push_back(0b11ULL << (2 * i));
    auto z = make_sparse_parity(2 * (1 << k), 2, masks);
    auto lr = k_sample_lr_norm(spectrum_of(z), k);
    EXPECT_LE(lr.uncentered, 2.0 + 1e-12);
}

TEST(SparseParity, SinglePairAtomLaw) {
    auto z = make_sparse_parity(4, 2, {0b11});
    auto atoms = atoms_of(spectrum_of(z));
    ASSERT_EQ(atoms.values.size(), 2u);
    EXPECT_NEAR(atoms.weights[0], 1.0, 1e-14);
    EXPECT_NEAR(atoms.values[0], 1.0, 1e-14);
    EXPECT_NEAR(atoms.weights[1], 0.0, 1e-14);
}

TEST(SparseParity, RejectsDuplicatesAndWrongSparsity) {
    EXPECT_THROW(make_sparse_parity(4, 2, {0b11, 0b11}), std::invalid_argument);
    EXPECT_THROW(make_sparse_parity(4, 2, {0b111}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// spiked Wishart
// ---------------------------------------------------------------------------

TEST(SpikedWishart, SeriesRadiusEnforced) {
    EXPECT_THROW(make_spiked_wishart(6, 0.2, 0.5), std::invalid_argument);
}

TEST(SpikedWishart, ZeroOverlapClassHasUnitCorrelation) {
    auto z = make_spiked_wishart(6, 0.3, 0.4);
    const auto& sp = spectrum_of(z);
    bool found = false;
    for (std::size_t i = 0; i < sp.count(); ++i)
        if (std::abs(sp.correlation(i) - 1.0) < 1e-15) found = true;
    EXPECT_TRUE(found);
}

TEST(SpikedWishart, TruncatedSeriesMatchesClosedFormAtFullDegree) {
    auto z = make_spiked_wishart(8, 0.25, 0.35);
    const auto& sp = spectrum_of(z);
    for (std::size_t i = 0; i < sp.count(); ++i)
        EXPECT_NEAR(sp.correlation(i, Degree(200)), sp.correlation(i), 1e-12);
}

TEST(SpikedWishart, PairLawIsAProbabilityLaw) {
    auto law = wishart_pair_law(8, 0.3);
    double total = 0.0;
    for (double w : law.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(SpikedWishart, OddHermiteDegreeCoefficientVanishes) {
    std::vector<std::vector<int>> alpha = {{1, 0, 0, 0}, {2, 0, 0, 0}};  // |alpha_1| odd
    EXPECT_EQ(wishart_hermite_coeff_sq(4, 0.4, 0.3, alpha), 0.0);
}

TEST(SpikedWishart, HermiteCoefficientMatchesDirectMoment) {
    const int n = 5;
    const double rho = 0.4, lambda = 0.3;
    std::vector<std::vector<int>> alpha = {{2, 0, 0, 0, 0}};
    const double mom = wishart_prior_moment(n, rho, {2, 0, 0, 0, 0});
    const double expect = lambda * lambda * 0.5 * mom * mom;  // (|a|-1)!!/a! = 1/2
    EXPECT_NEAR(wishart_hermite_coeff_sq(n, rho, lambda, alpha), expect, 1e-15);
    double direct = 0.0;
    const double cap = 2.0 * rho * n;
    for (int j = 0; 1 + j <= n; ++j) {
        if (1.0 + j > cap) break;
        direct += binomial(std::uint64_t(n - 1), std::uint64_t(j)) * std::pow(rho, j) *
                  std::pow(1 - rho, n - 1 - j);
    }
    direct *= rho / (rho * n);
    EXPECT_NEAR(mom, direct, 1e-14);
}

TEST(SpikedWishart, HighDegreeSeriesMatchesSpectrumRoute) {
    const int n = 8, d = 2, k = 2;
    const double rho = 0.1, lambda = 0.4;
    auto z = make_spiked_wishart(n, rho, lambda);
    const double series = wishart_high_degree_series(n, rho, lambda, d, k);
    const double via_spectrum = high_degree_norm(spectrum_of(z), Degree(d), k);
    EXPECT_NEAR(series, via_spectrum, 1e-12);
}

TEST(SpikedWishart, HighDegreeTailBoundWithConstants) {
    // two-stage tail bound with all constants kept:
    //   ||E (Dbar^{>d})^{(x)k}||^2
    //     <= C(d+2, d/2+1)^k  phi(Z_max)^{k(d+3)}  E Z^{k(d/2+1)}
    // plus the moment bound
    //   E Z^{k(d+1)} <= (lambda^2/(4 rho n))^{k(d+1)} sum_l r^l
    // under r = 2 n k (d+1) rho^2 <= 1. The constant-free shortcut
    // (lambda^2/(4 rho n))^{k(d+1)} alone sits orders of magnitude below the
    // exact tail norm at any enumerable size, so the constant-bearing form
    // is the testable statement.
    const int n = 8, d = 2, k = 2;
    const double rho = 0.1, lambda = 0.4;
    ASSERT_LE(2.0 * n * k * (d + 1) * rho * rho, 1.0);
    const double lhs = wishart_high_degree_series(n, rho, lambda, d, k);
    auto law = wishart_pair_law(n, rho);
    // Taylor remainder of phi after the degree-d/2 term is O(x^{d/2+1})
    double z_max = 0.0, ez_taylor = 0.0, ez_moment = 0.0;
    const int t_taylor = k * (d / 2 + 1);
    const int t_moment = k * (d + 1);
    for (std::size_t i = 0; i < law.weights.size(); ++i) {
        const double z = lambda * lambda * law.overlaps[i] * law.overlaps[i] / 4.0;
        z_max = std::max(z_max, z);
        ez_taylor += law.weights[i] * std::pow(z, t_taylor);
        ez_moment += law.weights[i] * std::pow(z, t_moment);
    }
    const double prefactor = std::pow(binomial(std::uint64_t(d + 2), std::uint64_t(d / 2 + 1)), k) *
                             std::pow(1.0 / std::sqrt(1.0 - 4.0 * z_max), k * (d + 3));
    EXPECT_LE(lhs, prefactor * ez_taylor * (1.0 + 1e-10));
    // the moment bound at exponent k(d+1) holds with the geometric sum
    const double r = 2.0 * n * k * (d + 1) * rho * rho;
    double geom = 0.0;
    for (int l = 1; l <= t_moment; ++l) geom += std::pow(r, l);
    EXPECT_LE(ez_moment, std::pow(lambda * lambda / (4.0 * rho * n), t_moment) * std::max(1.0, geom));
}

// ---------------------------------------------------------------------------
// prsGGM
// ---------------------------------------------------------------------------

TEST(PrsGgm, DisjointSupportsGiveUnitCorrelation) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6, 6), b = Eigen::MatrixXd::Zero(6, 6);
    a(0, 1) = a(1, 0) = 0.05;
    b(3, 4) = b(4, 3) = -0.05;
    EXPECT_NEAR(covariance_correlation(a, b), 1.0, 1e-14);
    EXPECT_NEAR(covariance_correlation(Eigen::MatrixXd::Zero(4, 4), Eigen::MatrixXd::Zero(4, 4)), 1.0,
                1e-14);
}

TEST(PrsGgm, SamplerProducesValidRegularSignedGraphs) {
    const int n = 20, s = 6, d = 3;
    const double kappa = 0.06;  // kappa sqrt(3) < 1/6
    auto z = make_prs_ggm(n, s, d, kappa, 11);
    RngStream rng(5);
    for (int it = 0; it < 5; ++it) {
        auto alt = z.problem.prior.sampler(rng);
        const auto& delta = std::get<CovarianceAlternate>(alt).delta;
        int nonzero_rows = 0;
        for (int i = 0; i < n; ++i) {
            int deg = 0;
            for (int j = 0; j < n; ++j) {
                if (delta(i, j) != 0.0) {
                    EXPECT_NEAR(std::abs(delta(i, j)), kappa, 1e-15);
                    ++deg;
                }
            }
            if (deg > 0) {
                EXPECT_EQ(deg, d);
                ++nonzero_rows;
            }
        }
        EXPECT_EQ(nonzero_rows, s);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(delta, Eigen::EigenvaluesOnly);
        EXPECT_LE(std::max(std::abs(es.eigenvalues().minCoeff()), es.eigenvalues().maxCoeff()),
                  kappa * 2.0 * std::sqrt(double(d)) + 1e-12);
    }
}

TEST(PrsGgm, MomentBoundHoldsOnSampledPairs) {
    // E (<Dbar_u, Dbar_v> - 1)^k <= (s^2/n) ((1 + kappa^2 d)^{s/2} - 1)^k
    const int n = 60, s = 6, d = 3, k = 2;
    const double kappa = 0.05;
    auto z = make_prs_ggm(n, s, d, kappa, 7);
    RngStream rng(13);
    const int pairs = 400;
    CompensatedSum acc, acc2;
    for (int it = 0; it < pairs; ++it) {
        auto u = z.problem.prior.sampler(rng);
        auto v = z.problem.prior.sampler(rng);
        const double x = covariance_correlation(std::get<CovarianceAlternate>(u).delta,
                                                std::get<CovarianceAlternate>(v).delta) -
                         1.0;
        acc.add(std::pow(x, k));
        acc2.add(std::pow(x, 2 * k));
    }
    const double mean = acc.value() / pairs;
    const double var = std::max(0.0, acc2.value() / pairs - mean * mean);
    const double stderr_mc = std::sqrt(var / pairs);
    const double bound =
        (double(s) * s / n) * std::pow(std::pow(1.0 + kappa * kappa * d, s / 2.0) - 1.0, k);
    EXPECT_LE(mean, bound + 3.0 * stderr_mc);
}

// ---------------------------------------------------------------------------
// SDA counterexample
// ---------------------------------------------------------------------------

TEST(SdaCounterexample, DensitiesAreNonnegativeWithUnitMean) {
    auto ce = make_sda_counterexample(64, 3);
    const auto& null = std::get<ProductNull>(ce.instance.problem.null);
    for (const auto& alt : ce.instance.problem.prior.alternates) {
        const auto& t = std::get<DenseAlternate>(alt).probs;
        CompensatedSum mass;
        for (double p : t) {
            EXPECT_GE(p, 0.0);
            mass.add(p);
        }
        EXPECT_NEAR(mass.value(), 1.0, 1e-10);
    }
    EXPECT_EQ(null.num_states(), 64u);
}

TEST(SdaCounterexample, CorrelationMatchesGramFormula) {
    // <Dbar_i, Dbar_j> - 1 = (<v_i, v_j> +- alpha^2) / (4 n vmax^2)
    const int n = 64;
    auto ce = make_sda_counterexample(n, 3);
    CorrelationEngine eng(ce.instance.problem);
    const double scale = 4.0 * n * ce.v_max * ce.v_max;
    for (int i = 0; i < n; i += 7)
        for (int j = i; j < n; j += 5) {
            const double direct = eng.correlation(ce.instance.problem.prior.alternates[std::size_t(i)],
                                                  ce.instance.problem.prior.alternates[std::size_t(j)],
                                                  Degree::unbounded()) -
                                  1.0;
            EXPECT_NEAR(direct, ce.gram(i, j) / scale, ce.alpha_sq / scale + 1e-12);
        }
}

TEST(SdaCounterexample, ProductSdaExceedsSdaAtDeskScale) {
    auto ce = make_sda_counterexample(128, 7);
    double diag_mean = 0.0;
    for (int i = 0; i < 128; ++i) diag_mean += ce.gram(i, i);
    diag_mean /= 128.0 * (4.0 * 128.0 * ce.v_max * ce.v_max);
    const double m = 5.0 / diag_mean;
    auto s = sda(ce.atoms, m);
    auto p = product_sda(pair_matrix(ce.instance.problem), m);
    ASSERT_GE(s.q, 1u);
    EXPECT_GE(double(p.q_lower) / double(s.q), 2.0);
}

TEST(SpikedWishart, SampledPriorMatchesExactLawMoments) {
    // n <= 20: Monte-Carlo atoms through the sampled prior agree with the
    // exact dynamic-programming pair law
    const int n = 10;
    auto z = make_spiked_wishart(n, 0.3, 0.35, 5);
    auto exact = atoms_of(spectrum_of(z));
    auto mc = correlation_atoms(z.problem, AtomsMode::MonteCarlo, 40000, 11);
    double e1 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < exact.values.size(); ++i) e1 += exact.weights[i] * exact.values[i];
    for (std::size_t i = 0; i < mc.values.size(); ++i) {
        m1 += mc.weights[i] * mc.values[i];
        m2 += mc.weights[i] * mc.values[i] * mc.values[i];
    }
    const double se = std::sqrt(std::max(1e-30, m2 - m1 * m1) / double(mc.values.size()));
    EXPECT_NEAR(m1, e1, 5.0 * se + 1e-12);
}

TEST(SpikedWishart, LargeDimensionFallsBackToSampledPrior) {
    auto z = make_spiked_wishart(40, 0.2, 0.3, 9);
    EXPECT_FALSE(z.spectrum.has_value());
    auto atoms = correlation_atoms(z.problem, AtomsMode::MonteCarlo, 2000, 13);
    for (double v : atoms.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(MultisampleHpc, LargeInstanceUsesClosedFormLabels) {
    // C(40,10) blows the tabulation caps: closed-form labels take over
    const double q = 0.5;
    auto z = make_multisample_hpc(40, 10, 2, q);
    EXPECT_FALSE(z.problem.prior.explicit_list());
    // sampler produces K-subsets; pairwise closed form is q^{-C(|ov|,2)}
    RngStream rng(3);
    for (int it = 0; it < 20; ++it) {
        auto a = z.problem.prior.sampler(rng);
        auto b = z.problem.prior.sampler(rng);
        const auto ma = std::uint64_t(std::get<LabelAlternate>(a).label);
        const auto mb = std::uint64_t(std::get<LabelAlternate>(b).label);
        EXPECT_EQ(__builtin_popcountll(ma), 10);
        const int ov = __builtin_popcountll(ma & mb);
        const double expect =
            ov >= 2 ? std::pow(q, -binomial(std::uint64_t(ov), 2)) : 1.0;
        EXPECT_NEAR(z.problem.closed_form(a, b, Degree::unbounded()), expect, 1e-9 * expect);
    }
}
