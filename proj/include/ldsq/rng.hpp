#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ldsq {

// Stable 64-bit mix for deriving child seeds. All parallel decompositions
// (Monte-Carlo chunks, sweep grid points, per-edge cloning) derive their
// streams through this, so results are independent of scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x51ed2701a3b5ef17ULL));
}

// mt19937_64 plus explicit samplers. The standard engine is fully specified;
// we avoid std::*_distribution because their stream is not pinned by the
// standard and the CLI promises byte-identical output for identical seeds.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : eng_(splitmix64(seed)), base_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return (bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (~n + 1) % n;  // rejection sampling, unbiased
        for (;;) {
            std::uint64_t r = bits();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; caches the second variate.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    RngStream child(std::uint64_t index) const { return RngStream(derive_seed(base_, index)); }

  private:
    std::mt19937_64 eng_;
    std::uint64_t base_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ldsq
