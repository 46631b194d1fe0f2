#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ldsq/common.hpp"

namespace ldsq {

// Pearson chi-square goodness of fit against fully specified cell
// probabilities.
struct ChiSquareReport {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

inline ChiSquareReport chi_square_gof(const std::vector<std::uint64_t>& counts,
                                      const std::vector<double>& probs) {
    require(counts.size() == probs.size(), "chi_square_gof: size mismatch");
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    require(n > 0, "chi_square_gof: empty sample");
    ChiSquareReport r;
    int live_cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expect = probs[i] * double(n);
        if (probs[i] == 0.0) {
            // structural zero: any observation is an immediate failure
            if (counts[i] > 0) r.statistic = std::numeric_limits<double>::infinity();
            continue;
        }
        ++live_cells;
        const double diff = double(counts[i]) - expect;
        r.statistic += diff * diff / expect;
    }
    r.df = double(live_cells - 1);
    r.p_value = std::isinf(r.statistic) ? 0.0 : chi_square_tail(r.statistic, r.df);
    return r;
}

// Mardia multivariate normality statistics (classical form: samples are
// standardized by the sample mean and covariance, so T b1/6 ~
// chi^2(m(m+1)(m+2)/6) and b2 ~ N(m(m+2), 8m(m+2)/T) under normality).
// b1 is computed as the squared Frobenius norm of the standardized third
// moment tensor, which equals (1/T^2) sum_{ij} <z_i, z_j>^3 without the
// quadratic pass over pairs.
struct MardiaReport {
    double b1 = 0.0;
    double b1_statistic = 0.0;  // T b1 / 6
    double b1_df = 0.0;
    double b1_zscore = 0.0;
    double b2 = 0.0;
    double b2_zscore = 0.0;
};

inline MardiaReport mardia_statistics(const std::vector<std::vector<double>>& samples) {
    require(!samples.empty(), "mardia: empty sample");
    const std::size_t t = samples.size();
    const std::size_t m = samples[0].size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(Eigen::Index(m));
    for (const auto& y : samples)
        for (std::size_t a = 0; a < m; ++a) mean(Eigen::Index(a)) += y[a];
    mean /= double(t);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
    for (const auto& y : samples)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                cov(Eigen::Index(a), Eigen::Index(b)) +=
                    (y[a] - mean(Eigen::Index(a))) * (y[b] - mean(Eigen::Index(b)));
    cov /= double(t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    require(es.eigenvalues().minCoeff() > 1e-12, "mardia: singular sample covariance");
    Eigen::MatrixXd whiten = es.operatorInverseSqrt();

    std::vector<double> third(m * m * m, 0.0);
    double b2 = 0.0;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(Eigen::Index(m));
    for (const auto& y : samples) {
        for (std::size_t a = 0; a < m; ++a) z(Eigen::Index(a)) = y[a] - mean(Eigen::Index(a));
        z = whiten * z;
        const double nsq = z.squaredNorm();
        b2 += nsq * nsq;
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                for (std::size_t c = 0; c < m; ++c)
                    third[(a * m + b) * m + c] += z(Eigen::Index(a)) * z(Eigen::Index(b)) * z(Eigen::Index(c));
    }
    MardiaReport r;
    CompensatedSum b1;
    for (double v : third) b1.add((v / double(t)) * (v / double(t)));
    r.b1 = b1.value();
    r.b2 = b2 / double(t);
    r.b1_statistic = double(t) * r.b1 / 6.0;
    r.b1_df = double(m * (m + 1) * (m + 2)) / 6.0;
    r.b1_zscore = (r.b1_statistic - r.b1_df) / std::sqrt(2.0 * r.b1_df);
    const double md = double(m);
    r.b2_zscore = (r.b2 - md * (md + 2.0)) / std::sqrt(8.0 * md * (md + 2.0) / double(t));
    return r;
}

}  // namespace ldsq
