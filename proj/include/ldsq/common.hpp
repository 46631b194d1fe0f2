#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldsq {

// Per-sample polynomial degree bound. Negative internal value marks the
// unbounded ("full projection") case.
class Degree {
  public:
    constexpr Degree() : v_(-1) {}
    constexpr explicit Degree(int d) : v_(d) {}
    static constexpr Degree unbounded() { return Degree(); }

    bool is_unbounded() const { return v_ < 0; }
    int value() const {
        if (is_unbounded()) throw std::logic_error("Degree: unbounded has no value");
        return v_;
    }
    // true if the projection keeps total degree t
    bool keeps(int t) const { return is_unbounded() || t <= v_; }
    bool operator==(const Degree& o) const { return v_ == o.v_ || (is_unbounded() && o.is_unbounded()); }

    std::string str() const { return is_unbounded() ? "inf" : std::to_string(v_); }

  private:
    int v_;
};

// Samplewise degree (d, k): per-sample degree at most d, nonzero degree in at
// most k of the m samples.
struct SamplewiseDegree {
    Degree per_sample;
    int active_samples = 1;

    SamplewiseDegree() = default;
    SamplewiseDegree(Degree d, int k) : per_sample(d), active_samples(k) {
        if (k < 0) throw std::invalid_argument("SamplewiseDegree: k must be >= 0");
    }
};

// Neumaier compensated accumulator. Correlation sums mix large positive and
// tiny terms; the compensation keeps the identity checks near 1e-12.
class CompensatedSum {
  public:
    void add(double x) {
        double t = s_ + x;
        if (std::abs(s_) >= std::abs(x))
            c_ += (s_ - t) + x;
        else
            c_ += (x - t) + s_;
        s_ = t;
    }
    double value() const { return s_ + c_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double compensated_dot(const std::vector<double>& a, const std::vector<double>& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

// Binomial coefficient as a double. Exact integer arithmetic up to m <= 60;
// log-gamma beyond that. Throws on double overflow (t * ln m past range).
inline double binomial(std::uint64_t m, std::uint64_t t) {
    if (t > m) return 0.0;
    if (t == 0 || t == m) return 1.0;
    if (t > m - t) t = m - t;
    if (m <= 60) {
        unsigned __int128 num = 1;
        for (std::uint64_t i = 0; i < t; ++i) {
            num *= (m - i);
            num /= (i + 1);
        }
        return static_cast<double>(num);
    }
    double lg = std::lgamma(double(m) + 1.0) - std::lgamma(double(t) + 1.0) -
                std::lgamma(double(m - t) + 1.0);
    if (lg > 700.0) throw std::overflow_error("binomial: C(" + std::to_string(m) + "," +
                                              std::to_string(t) + ") exceeds double range");
    return std::exp(lg);
}

// Truncated exponential series exp^{<=d}(x) = sum_{t<=d} x^t / t!.
inline double exp_truncated(double x, Degree d) {
    if (d.is_unbounded()) return std::exp(x);
    double term = 1.0, sum = 1.0;
    for (int t = 1; t <= d.value(); ++t) {
        term *= x / t;
        sum += term;
    }
    return sum;
}

inline bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Dense tabulation cap, shared by every exact enumeration; the CLI exposes it
// as --cap-states. Larger finite problems must use product form or
// closed-form correlations.
inline std::uint64_t& dense_state_cap() {
    static std::uint64_t cap = 1ULL << 22;
    return cap;
}

// Largest restriction mode set enumerated exactly (2^cap subsets); beyond it
// restricted priors fall back to seeded sampling. CLI flag --cap-restriction.
inline int& restriction_enumeration_cap() {
    static int cap = 12;
    return cap;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

// Regularized lower incomplete gamma P(a, x), by series / continued fraction.
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::domain_error("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Lentz continued fraction for Q(a, x)
    double b = x + 1.0 - a, c = 1e308, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    double q = std::exp(-x + a * std::log(x) - gln) * h;
    return 1.0 - q;
}

}  // namespace detail

// Upper tail of the chi-square distribution with df degrees of freedom.
inline double chi_square_tail(double stat, double df) {
    if (stat <= 0.0) return 1.0;
    return 1.0 - detail::gamma_p(df / 2.0, stat / 2.0);
}

}  // namespace ldsq
