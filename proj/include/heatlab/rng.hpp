#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace heatlab {

// Counter-based splittable PRNG. Every draw is a pure hash of (key, counter),
// so independent streams can be derived for parallel batches without shared
// state: stream b of a generator with key k has key mix(k, b). All experiment
// randomness flows from a single 64-bit seed through this type.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ull)), ctr_(0) {}

    // Derives an independent stream; the parent generator is unaffected.
    [[nodiscard]] Rng split(std::uint64_t stream) const {
        Rng r(0);
        r.key_ = mix(key_ ^ mix(stream + 0xd1342543de82ef95ull));
        r.ctr_ = 0;
        return r;
    }

    std::uint64_t next_u64() { return mix(key_ + (++ctr_) * 0x9e3779b97f4a7c15ull); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Box-Muller; the sine partner is discarded to keep the draw count
    // independent of call history.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u > 0 ? u : 0x1.0p-60, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::vector<double> gaussian_vector(int n) {
        std::vector<double> g(static_cast<std::size_t>(n));
        for (auto& v : g) v = normal();
        return g;
    }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_;
};

}  // namespace heatlab
