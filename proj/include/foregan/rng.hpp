#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace foregan {

// Seeded generator with fully specified value mappings, so streams are
// reproducible independent of the standard library's distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) {
        return static_cast<float>(lo + uniform01() * (static_cast<double>(hi) - lo));
    }

    // Box-Muller; consumes two draws per pair, caches the spare.
    float normal(float mean, float stddev) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * static_cast<float>(spare_);
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * static_cast<float>(r * std::cos(theta));
    }

    // Uniform integer in [0, n), n >= 1.
    std::int64_t below(std::int64_t n) {
        return static_cast<std::int64_t>(uniform01() * static_cast<double>(n));
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace foregan
