#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ldsq/noise.hpp"

using namespace ldsq;

namespace {

TestingProblem parity_problem(int n, std::vector<std::uint64_t> masks, double amp = 1.0) {
    TestingProblem pr;
    pr.null = ProductNull::uniform_hypercube(n);
    std::vector<Alternate> alts;
    for (auto m : masks) alts.push_back(ParityAlternate{m, amp});
    pr.prior = Prior::uniform(alts);
    return pr;
}

TestingProblem random_binary_product(int n, int n_alts, RngStream& rng, double spread = 0.4) {
    TestingProblem pr;
    pr.null = ProductNull::uniform_hypercube(n);
    std::vector<Alternate> alts;
    for (int u = 0; u < n_alts; ++u) {
        ProductAlternate a;
        for (int i = 0; i < n; ++i) {
            double bias = spread * rng.uniform(-1.0, 1.0);
            a.coord_probs.push_back({0.5 - bias / 2, 0.5 + bias / 2});
        }
        alts.push_back(a);
    }
    pr.prior = Prior::uniform(alts);
    return pr;
}

const CoordinateMarginal kUniformPm1{{-1.0, 1.0}, {0.5, 0.5}};

}  // namespace

TEST(MarkovOperator, StationarityValidated) {
    CoordinateMarginal biased{{-1.0, 1.0}, {0.3, 0.7}};
    validate_operator(MarkovOperatorSpec::resampler(biased), biased);
    validate_operator(MarkovOperatorSpec::t_rho(0.4, biased), biased);
    // a symmetric flip kernel is not stationary for a biased marginal
    Eigen::MatrixXd flip(2, 2);
    flip << 0.0, 1.0, 1.0, 0.0;
    EXPECT_THROW(validate_operator(MarkovOperatorSpec{flip}, biased), std::invalid_argument);
}

TEST(CertifyDEps, TRhoIsDRhoDOperator) {
    const double rho = 0.6;
    auto op = MarkovOperatorSpec::t_rho(rho, kUniformPm1);
    for (int d = 1; d <= 4; ++d) {
        auto rep = certify_d_eps(op, kUniformPm1, d, std::pow(rho, d));
        EXPECT_TRUE(rep.certified) << "d=" << d;
        EXPECT_NEAR(rep.bound, std::pow(rho, d), 1e-12);
    }
    auto rep = certify_d_eps(op, kUniformPm1, 1, rho);
    ASSERT_EQ(rep.eigenvalues.size(), 2u);
    EXPECT_NEAR(rep.eigenvalues[0], 1.0, 1e-12);
    EXPECT_NEAR(rep.eigenvalues[1], rho, 1e-12);
    EXPECT_FALSE(certify_d_eps(op, kUniformPm1, 1, rho / 2).certified);
}

TEST(CertifyDEps, IdentityOnlyCertifiesEpsOne) {
    auto op = MarkovOperatorSpec::identity(2);
    for (int d = 1; d <= 3; ++d) {
        EXPECT_TRUE(certify_d_eps(op, kUniformPm1, d, 1.0).certified);
        EXPECT_FALSE(certify_d_eps(op, kUniformPm1, d, 0.999).certified);
    }
}

TEST(CertifyDEps, FullResamplerIsOneZeroOperator) {
    CoordinateMarginal biased{{-1.0, 1.0}, {0.25, 0.75}};
    auto op = MarkovOperatorSpec::resampler(biased);
    auto rep = certify_d_eps(op, biased, 1, 0.0);
    EXPECT_TRUE(rep.certified);
    EXPECT_NEAR(rep.bound, 0.0, 1e-12);
}

TEST(CertifyDEps, ThreeSymbolTRho) {
    // on a 3-symbol alphabet every nonconstant eigenfunction of T_rho has
    // eigenvalue rho, so the best degree-2 certificate is (2, rho): a single
    // degree-2 character attenuates by rho only
    CoordinateMarginal tri{{0.0, 1.0, 2.0}, {0.2, 0.5, 0.3}};
    const double rho = 0.5;
    auto op = MarkovOperatorSpec::t_rho(rho, tri);
    auto rep = certify_d_eps(op, tri, 2, rho);
    EXPECT_TRUE(rep.certified);
    EXPECT_TRUE(rep.filtration_preserving);
    EXPECT_NEAR(rep.bound, rho, 1e-12);
    EXPECT_FALSE(certify_d_eps(op, tri, 2, rho * rho).certified);
}

TEST(ApplyNoise, IdentityLeavesProblemUnchanged) {
    RngStream rng(3);
    auto pr = random_binary_product(4, 3, rng);
    auto noised = apply_noise(pr, MarkovOperatorSpec::identity(2));
    auto s0 = exact_spectrum(pr);
    auto s1 = exact_spectrum(noised);
    ASSERT_EQ(s0.count(), s1.count());
    for (std::size_t i = 0; i < s0.count(); ++i)
        EXPECT_NEAR(s0.correlation(i), s1.correlation(i), 1e-12);
}

TEST(ApplyNoise, FullResampleCollapsesToNull) {
    RngStream rng(4);
    auto pr = random_binary_product(3, 2, rng);
    const auto& null = std::get<ProductNull>(pr.null);
    auto noised = apply_noise(pr, MarkovOperatorSpec::resampler(null.coord(0)));
    for (const auto& alt : noised.prior.alternates) {
        const auto& pa = std::get<ProductAlternate>(alt);
        for (int i = 0; i < null.dimension(); ++i) {
            EXPECT_NEAR(pa.coord_probs[std::size_t(i)][0], 0.5, 1e-12);
            EXPECT_NEAR(pa.coord_probs[std::size_t(i)][1], 0.5, 1e-12);
        }
    }
}

TEST(ApplyNoise, PreservesTotalMass) {
    RngStream rng(5);
    auto pr = random_binary_product(4, 3, rng);
    auto noised = apply_noise(pr, MarkovOperatorSpec::t_rho(0.7, kUniformPm1));
    const auto& null = std::get<ProductNull>(noised.null);
    for (const auto& alt : noised.prior.alternates) {
        auto table = dense_table(null, alt);
        CompensatedSum s;
        for (double p : table) s.add(p);
        EXPECT_NEAR(s.value(), 1.0, 1e-10);
    }
}

TEST(ApplyNoise, FourierAttenuationExact) {
    // character coefficient at alpha scales by exactly rho^{|alpha|} under T_rho
    RngStream rng(6);
    const int n = 6;
    auto pr = random_binary_product(n, 2, rng);
    const auto& null = std::get<ProductNull>(pr.null);
    const double rho = 0.55;
    auto noised = apply_noise(pr, MarkovOperatorSpec::t_rho(rho, null.coord(0)));
    auto basis = character_basis(null);
    auto degs = basis_degrees(null);
    for (std::size_t u = 0; u < pr.prior.alternates.size(); ++u) {
        auto before = character_coefficients(null, basis, dense_table(null, pr.prior.alternates[u]));
        auto after = character_coefficients(null, basis, dense_table(null, noised.prior.alternates[u]));
        for (std::size_t i = 0; i < before.size(); ++i)
            EXPECT_NEAR(after[i], before[i] * std::pow(rho, degs[i]), 1e-12);
    }
}

TEST(ApplyNoise, ParityAmplitudeScalesByRhoToS) {
    auto pr = parity_problem(6, {0b111});
    const double rho = 0.5;
    auto noised = apply_noise(pr, MarkovOperatorSpec::t_rho(rho, kUniformPm1));
    const auto& p = std::get<ParityAlternate>(noised.prior.alternates[0]);
    EXPECT_NEAR(p.amplitude, std::pow(rho, 3), 1e-14);
}

TEST(ApplyNoise, RestrictionRateOneLeavesProblemUnchanged) {
    RngStream rng(7);
    auto pr = random_binary_product(4, 2, rng);
    RestrictionSpec spec;
    spec.mode = RestrictionMode::Coordinate;
    spec.modes_n = 4;
    spec.rate = 1.0;
    spec.base = MarkovOperatorSpec::resampler(kUniformPm1);
    auto restricted = apply_noise(pr, spec);
    auto s0 = exact_spectrum(pr);
    auto s1 = exact_spectrum(restricted);
    ASSERT_EQ(s1.count(), s0.count());
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < s0.count(); ++i) {
        m0 += s0.weight(i) * s0.correlation(i);
        m1 += s1.weight(i) * s1.correlation(i);
    }
    EXPECT_NEAR(m0, m1, 1e-12);
}

TEST(ApplyNoise, RestrictionPriorIsCompositeOverUandR) {
    auto pr = parity_problem(3, {0b11});
    RestrictionSpec spec;
    spec.mode = RestrictionMode::Coordinate;
    spec.modes_n = 3;
    spec.rate = 0.5;
    spec.base = MarkovOperatorSpec::resampler(kUniformPm1);
    auto restricted = apply_noise(pr, spec);
    EXPECT_EQ(restricted.prior.alternates.size(), 8u);  // 2^3 masks x 1 alternate
    double wsum = 0.0;
    for (double w : restricted.prior.weights) wsum += w;
    EXPECT_NEAR(wsum, 1.0, 1e-12);
}

TEST(Niceness, NoisedParityValidUnnoisedInvalid) {
    // parities of degree s = 3 > k = 2 are purely high degree at d = k
    const int k = 2, s = 3;
    auto pr = parity_problem(8, {0b111, 0b11100, 0b1110000, 0b1011000});
    auto cert = niceness_certificate(pr, 64.0, k);
    EXPECT_FALSE(cert.valid);
    EXPECT_NEAR(cert.delta_sq, 0.25, 1e-12);  // delta = |S|^{-1/2}
    const double rho = 0.05;
    auto noised = apply_noise(pr, MarkovOperatorSpec::t_rho(rho, kUniformPm1));
    auto cert2 = niceness_certificate(noised, 64.0, k);
    EXPECT_TRUE(cert2.valid);
    EXPECT_NEAR(cert2.delta_sq, std::pow(rho, 2 * s * k) / 4.0, 1e-20);
}

TEST(Niceness, NullPriorValidForAllM) {
    TestingProblem pr;
    auto null = ProductNull::uniform_hypercube(2);
    pr.null = null;
    ProductAlternate nullalt;
    for (int i = 0; i < 2; ++i) nullalt.coord_probs.push_back(null.coord(i).probs);
    pr.prior = Prior::uniform({nullalt});
    for (double m : {1.0, 100.0, 1e6}) EXPECT_TRUE(niceness_certificate(pr, m, 2).valid);
}

// --- restriction bound checks ----------------------------------------------

namespace {

// dense-Fourier oracle for the restricted norm on tiny coordinate-mode
// instances: enumerate character tuples explicitly
double restricted_norm_dense_oracle(const TestingProblem& pr, const RestrictionSpec& spec, int d,
                                    int k) {
    const auto& null = std::get<ProductNull>(pr.null);
    const int n = null.dimension();
    auto basis = character_basis(null);
    std::vector<std::vector<double>> coef;
    for (const auto& alt : pr.prior.alternates)
        coef.push_back(character_coefficients(null, basis, dense_table(null, alt)));
    const double lam = binary_eigenvalue(spec.base, null.coord(0));
    const std::uint64_t nr = 1ULL << n;
    std::vector<double> pr_r(nr);
    for (std::uint64_t r = 0; r < nr; ++r)
        pr_r[r] = std::pow(spec.rate, __builtin_popcountll(r)) *
                  std::pow(1.0 - spec.rate, n - __builtin_popcountll(r));
    const std::size_t nu = pr.prior.alternates.size();
    double total = 0.0;
    std::vector<std::uint64_t> tuple(std::size_t(k), 0);
    std::uint64_t count = 1;
    for (int i = 0; i < k; ++i) count *= nr;
    for (std::uint64_t t = 0; t < count; ++t) {
        std::uint64_t x = t;
        bool ok = true;
        for (int i = 0; i < k; ++i) {
            tuple[std::size_t(i)] = x % nr;
            x /= nr;
            if (__builtin_popcountll(tuple[std::size_t(i)]) <= d) ok = false;
        }
        if (!ok) continue;
        double mean = 0.0;
        for (std::size_t u = 0; u < nu; ++u) {
            double base = pr.prior.weights[u];
            for (int i = 0; i < k; ++i) base *= coef[u][tuple[std::size_t(i)]];
            if (base == 0.0) continue;
            double er = 0.0;
            for (std::uint64_t r = 0; r < nr; ++r) {
                if (pr_r[r] == 0.0) continue;
                int missing = 0;
                for (int i = 0; i < k; ++i) missing += __builtin_popcountll(tuple[std::size_t(i)] & ~r);
                er += pr_r[r] * (missing == 0 ? 1.0 : std::pow(lam, missing));
            }
            mean += base * er;
        }
        total += mean * mean;
    }
    return total;
}

}  // namespace

TEST(RestrictionBounds, ShapeRouteMatchesDenseOracle) {
    RngStream rng(11);
    auto pr = random_binary_product(3, 2, rng);
    RestrictionSpec spec;
    spec.mode = RestrictionMode::Coordinate;
    spec.modes_n = 3;
    spec.rate = 0.4;
    spec.base = MarkovOperatorSpec::t_rho(0.3, kUniformPm1);
    auto shapes = coefficient_shapes(pr);
    for (int d = 0; d <= 1; ++d) {
        auto rep = verify_restriction_bounds(shapes, pr.prior.weights, 3, spec, kUniformPm1, d, 2);
        double oracle = restricted_norm_dense_oracle(pr, spec, d, 2);
        EXPECT_NEAR(rep.lhs, oracle, 1e-10) << "d=" << d;
    }
}

TEST(RestrictionBounds, CoordinateModeMarginsNonnegative) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        RngStream rng(seed);
        auto pr = random_binary_product(6, 3, rng, 0.5);
        RestrictionSpec spec;
        spec.mode = RestrictionMode::Coordinate;
        spec.modes_n = 6;
        spec.rate = 0.25;
        spec.base = MarkovOperatorSpec::t_rho(0.3, kUniformPm1);
        auto shapes = coefficient_shapes(pr);
        for (int d = 0; d <= 2; ++d) {
            auto rep = verify_restriction_bounds(shapes, pr.prior.weights, 6, spec, kUniformPm1, d, 2);
            EXPECT_GE(rep.margin, -1e-10) << "seed=" << seed << " d=" << d;
        }
    }
}

TEST(RestrictionBounds, SubtensorAndSubsetModesMarginsNonnegative) {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        RngStream rng(seed);
        const int n = 4, p = 2;
        for (auto mode : {RestrictionMode::Subtensor, RestrictionMode::Subset}) {
            int n_coords = mode == RestrictionMode::Subtensor ? n * n : 6;
            auto pr = random_binary_product(n_coords, 2, rng, 0.4);
            RestrictionSpec spec;
            spec.mode = mode;
            spec.p = p;
            spec.modes_n = n;
            spec.rate = 0.5;  // s = 2, 2s <= n
            spec.base = MarkovOperatorSpec::t_rho(0.2, kUniformPm1);
            auto shapes = coefficient_shapes(pr);
            for (int d = 0; d <= 1; ++d) {
                auto rep =
                    verify_restriction_bounds(shapes, pr.prior.weights, n_coords, spec, kUniformPm1, d, 4);
                EXPECT_GE(rep.margin, -1e-10) << "mode=" << int(mode) << " d=" << d;
            }
        }
    }
}

TEST(RestrictionBounds, ZeroNoiseZeroRateKillsEverything) {
    auto pr = parity_problem(4, {0b11, 0b1100});
    RestrictionSpec spec;
    spec.mode = RestrictionMode::Coordinate;
    spec.modes_n = 4;
    spec.rate = 0.0;
    spec.base = MarkovOperatorSpec::resampler(kUniformPm1);
    auto shapes = coefficient_shapes(pr);
    auto rep = verify_restriction_bounds(shapes, pr.prior.weights, 4, spec, kUniformPm1, 1, 2);
    EXPECT_NEAR(rep.lhs, 0.0, 1e-15);
}

TEST(RestrictionBounds, NegativeDegreeSentinelRejected) {
    auto pr = parity_problem(4, {0b11});
    RestrictionSpec spec;
    spec.mode = RestrictionMode::Coordinate;
    spec.modes_n = 4;
    spec.rate = 0.5;
    spec.base = MarkovOperatorSpec::resampler(kUniformPm1);
    auto shapes = coefficient_shapes(pr);
    EXPECT_THROW(verify_restriction_bounds(shapes, pr.prior.weights, 4, spec, kUniformPm1, -1, 2),
                 std::invalid_argument);
}
