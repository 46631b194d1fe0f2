#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ldsq/noise.hpp"
#include "ldsq/sda.hpp"
#include "ldsq/sq.hpp"

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

}  // namespace

TEST(VstatAnswer, ConstantQueryHonest) {
    TestingProblem pr;
    pr.null = ProductNull::uniform_hypercube(2);
    pr.prior = Prior::uniform({ParityAlternate{0b11}});
    const double c = 0.3;
    TabulatedQuery q{std::vector<double>(4, c)};
    SqTranscript transcript;
    auto ans = vstat_answer(pr, NullHypothesis{}, q, 25.0, Adversary::Honest, &transcript);
    EXPECT_NEAR(ans.value, c, 1e-12);
    EXPECT_NEAR(ans.tolerance, std::max(1.0 / 25.0, std::sqrt(c * (1 - c) / 25.0)), 1e-12);
    ASSERT_EQ(transcript.entries.size(), 1u);
}

TEST(VstatAnswer, ParityQueryClosedForms) {
    const double rho = 0.5;
    const int s = 2;
    auto pr = parity_problem(6, {0b11, 0b1100}, std::pow(rho, s));  // noised amplitudes
    ParityQuery q{0b11};
    EXPECT_NEAR(true_expectation(pr, NullHypothesis{}, Query(q)), 0.5, 1e-15);
    EXPECT_NEAR(true_expectation(pr, pr.prior.alternates[0], Query(q)), 0.5 * (1 + std::pow(rho, s)),
                1e-15);
    EXPECT_NEAR(true_expectation(pr, pr.prior.alternates[1], Query(q)), 0.5, 1e-15);
}

TEST(VstatAnswer, TowardNullClampsIntoTolerance) {
    auto pr = parity_problem(4, {0b11});
    ParityQuery q{0b11};
    auto strong = vstat_answer(pr, pr.prior.alternates[0], Query(q), 10000.0, Adversary::TowardNull);
    EXPECT_GT(strong.value, 0.5);
    EXPECT_NEAR(std::abs(strong.value - strong.true_value), strong.tolerance, 1e-12);
    auto weak = vstat_answer(pr, pr.prior.alternates[0], Query(q), 2.0, Adversary::TowardNull);
    EXPECT_NEAR(weak.value, 0.5, 1e-12);
}

TEST(VstatAnswer, CustomAdversaryValidated) {
    auto pr = parity_problem(4, {0b11});
    ParityQuery q{0b11};
    CustomAdversary bad = [](double p, double tau, double, const SqTranscript&) {
        return p + 2.0 * tau;
    };
    EXPECT_THROW(
        vstat_answer(pr, pr.prior.alternates[0], Query(q), 9.0, Adversary::Custom, nullptr, bad),
        std::invalid_argument);
    CustomAdversary ok = [](double p, double tau, double, const SqTranscript&) { return p - tau; };
    auto ans = vstat_answer(pr, pr.prior.alternates[0], Query(q), 9.0, Adversary::Custom, nullptr, ok);
    EXPECT_NEAR(ans.value, ans.true_value - ans.tolerance, 1e-12);
}

TEST(VstatAnswer, GaussianThresholdClosedForm) {
    TestingProblem pr;
    pr.null = GaussianNull{2};
    pr.prior = Prior::uniform({MeanShiftAlternate{{1.0, 0.5}}});
    GaussianThresholdQuery q{{1.0, 0.0}, 0.7};
    EXPECT_NEAR(true_expectation(pr, NullHypothesis{}, Query(q)), normal_cdf(-0.7), 1e-12);
    EXPECT_NEAR(true_expectation(pr, pr.prior.alternates[0], Query(q)), normal_cdf(1.0 - 0.7), 1e-12);
}

TEST(RunSqAlgorithm, SparseParityPolicySucceedsAgainstHonestOracle) {
    const double rho = 0.5;
    const int s = 2;
    std::vector<std::uint64_t> masks = {0b11, 0b110, 0b1100, 0b11000};
    auto pr = parity_problem(6, masks, std::pow(rho, s));
    const double m_oracle = 9.0 * std::pow(rho, -2.0 * s);  // 144
    auto policy = sparse_parity_policy(masks, vstat_tolerance(0.5, m_oracle));
    auto rep = run_sq_algorithm(policy, pr, m_oracle, Adversary::Honest, 200, 17);
    EXPECT_GE(rep.success, 0.99);
}

TEST(RunSqAlgorithm, SparseParityPolicyFailsAgainstTowardNullAtWeakOracle) {
    const double rho = 0.5;
    const int s = 2;
    std::vector<std::uint64_t> masks = {0b11, 0b110, 0b1100, 0b11000};
    auto pr = parity_problem(6, masks, std::pow(rho, s));
    const double m_oracle = std::pow(rho, -2.0 * s) / 9.0;
    auto policy = sparse_parity_policy(masks, vstat_tolerance(0.5, m_oracle));
    auto rep = run_sq_algorithm(policy, pr, m_oracle, Adversary::TowardNull, 200, 18);
    EXPECT_LE(rep.success, 0.5);
}

TEST(RunSqAlgorithm, EmptyPolicyFails) {
    auto pr = parity_problem(4, {0b11});
    auto rep = run_sq_algorithm(empty_policy(), pr, 100.0, Adversary::Honest, 50, 3);
    EXPECT_LE(rep.success, 0.5);
}

TEST(RunSqAlgorithm, QueryCapEnforced) {
    auto pr = parity_problem(4, {0b11});
    SqPolicy loop{"loop", [](const SqTranscript&) -> PolicyStep { return Query(ParityQuery{0b11}); }};
    EXPECT_THROW(run_sq_algorithm(loop, pr, 100.0, Adversary::Honest, 1, 3, 16),
                 std::invalid_argument);
}

TEST(DistinguisherScore, ConstantFunctionHasZeroBeta) {
    auto pr = parity_problem(3, {0b11});
    std::vector<double> p(8 * 8, 0.7);  // constant over 2 samples
    auto score = distinguisher_score(p, pr, 2);
    EXPECT_NEAR(score.advantage, 0.0, 1e-12);
    EXPECT_EQ(score.beta, 0.0);
    EXPECT_FALSE(score.beta_unbounded);
}

TEST(DistinguisherScore, CanonicalProjectionAchievesLdlrNorm) {
    // p = E_u (Dbar_u^{(x)m})^{<=d,k} - 1 as a samplewise character
    // polynomial: beta must equal the (d,k)-LDLR_m norm
    std::vector<std::uint64_t> masks = {0b11, 0b101, 0b1001};
    auto pr = parity_problem(4, masks);
    const int m = 3, k = 2;
    std::vector<CharPolyTerm> terms;
    for (std::size_t u = 0; u < masks.size(); ++u) {
        for (int b = 1; b < (1 << m); ++b) {
            if (__builtin_popcount(b) > k) continue;
            CharPolyTerm t;
            t.coeff = 1.0 / double(masks.size());
            for (int i = 0; i < m; ++i)
                if (b >> i & 1) t.factors.push_back({i, masks[u]});
            terms.push_back(t);
        }
    }
    auto score = distinguisher_score(terms, pr, m);
    double ldlr = std::sqrt(ldlr_norm(pr, m, SamplewiseDegree(Degree::unbounded(), k)).squared_norm);
    EXPECT_NEAR(score.beta, ldlr, 1e-9);
}

TEST(DistinguisherScore, TabulatedAgreesWithCharPolyRoute) {
    auto pr = parity_problem(3, {0b11, 0b101});
    const auto& null = std::get<ProductNull>(pr.null);
    const int m = 2;
    std::vector<CharPolyTerm> terms = {{{{0, 0b11}}, 1.0}, {{{0, 0b101}, {1, 0b101}}, 0.5}};
    auto score_char = distinguisher_score(terms, pr, m);
    std::uint64_t states = null.num_states();
    std::vector<double> tab(states * states);
    auto chi = [&](std::uint64_t mask, std::uint64_t x) {
        int par = 1;
        for (; mask != 0; mask >>= 1, x >>= 1)
            if ((mask & 1ULL) && (x & 1ULL) == 0ULL) par = -par;
        return double(par);
    };
    for (std::uint64_t x2 = 0; x2 < states; ++x2)
        for (std::uint64_t x1 = 0; x1 < states; ++x1)
            tab[x2 * states + x1] = chi(0b11, x1) + 0.5 * chi(0b101, x1) * chi(0b101, x2);
    auto score_tab = distinguisher_score(tab, pr, m);
    EXPECT_NEAR(score_char.beta, score_tab.beta, 1e-10);
    EXPECT_NEAR(score_char.advantage, score_tab.advantage, 1e-12);
}

TEST(DistinguisherScore, LowDegreeFunctionsAreBlindToParity) {
    auto pr = parity_problem(5, {0b111, 0b11100});
    std::vector<CharPolyTerm> terms = {{{{0, 0b1}}, 0.4}, {{{0, 0b11}, {1, 0b1}}, 0.6}};
    auto score = distinguisher_score(terms, pr, 2);
    EXPECT_EQ(score.advantage, 0.0);
    EXPECT_EQ(score.beta, 0.0);
}

TEST(BuildFPsi, SingleQuerySingleSampleIsCentering) {
    auto pr = parity_problem(4, {0b11});
    auto f = build_f_psi({Query(ParityQuery{0b11})}, pr, 1, 1);
    auto rep = verify_f_psi(f, pr, 0.5, Degree::unbounded());
    EXPECT_NEAR(rep.null_mean, 0.0, 1e-12);
    // E psibar^2 = (E psi^2 - p^2)/p = (1/2 - 1/4)/(1/2) = 1/2
    EXPECT_NEAR(rep.null_second_moment, 0.5, 1e-12);
}

TEST(BuildFPsi, TwoParityQueriesTwoOfFourSamples) {
    std::vector<std::uint64_t> masks = {0b11, 0b1100};
    auto pr = parity_problem(4, masks);
    auto f = build_f_psi({Query(ParityQuery{masks[0]}), Query(ParityQuery{masks[1]})}, pr, 4, 2);
    auto rep = verify_f_psi(f, pr, 0.5, Degree::unbounded());
    EXPECT_NEAR(rep.null_mean, 0.0, 1e-12);
    EXPECT_LE(rep.null_second_moment, 4.0 + 1e-12);  // q^2 with q = 2 queries
    EXPECT_TRUE(rep.lower_bound_ok);
    EXPECT_TRUE(rep.trunc_checked);
    EXPECT_TRUE(rep.trunc_ok);
}

TEST(BuildFPsi, RejectsUncenterableQuery) {
    auto pr = parity_problem(4, {0b11});
    TabulatedQuery q{std::vector<double>(16, 0.9)};
    EXPECT_THROW(build_f_psi({Query(q)}, pr, 2, 1), std::invalid_argument);
}

TEST(BuildFPsi, NullOnlyQueriesGiveZeroAdvantage) {
    // a parity outside the family: psibar vanishes on alternates too
    auto pr = parity_problem(5, {0b11});
    auto f = build_f_psi({Query(ParityQuery{0b11000})}, pr, 3, 1);
    auto rep = verify_f_psi(f, pr, 0.5, Degree::unbounded());
    EXPECT_NEAR(rep.alt_expectation, 0.0, 1e-12);
    EXPECT_NEAR(rep.eta, 1.0, 1e-12);
}

TEST(OracleLowerBound, NoSmallPolicyBeatsTowardNullWhenSdaIsLarge) {
    // sda(problem, 3/tau) = q*: no nonadaptive policy with <= q* queries gets
    // success > 0.99 against toward_null at VSTAT(1/tau); checked on the
    // noised parity family where the parity queries are optimal
    const double rho = 0.4;
    const int s = 2;
    std::vector<std::uint64_t> masks = {0b11, 0b110, 0b1100, 0b11000, 0b110000, 0b1010, 0b10010,
                                        0b100100};
    auto pr = parity_problem(6, masks, std::pow(rho, s));
    const double tau = 0.2;
    auto atoms = correlation_atoms(pr, AtomsMode::Exact);
    auto sda_rep = sda(atoms, 3.0 / tau);
    ASSERT_GE(sda_rep.q, 1u);
    for (std::size_t take = 1; take <= std::min<std::size_t>(sda_rep.q, masks.size()); ++take) {
        std::vector<std::uint64_t> subset(masks.begin(), masks.begin() + std::ptrdiff_t(take));
        auto policy = sparse_parity_policy(subset, vstat_tolerance(0.5, 1.0 / tau));
        auto rep = run_sq_algorithm(policy, pr, 1.0 / tau, Adversary::TowardNull, 100, 23);
        EXPECT_LE(rep.success, 0.99) << "take=" << take;
    }
}
