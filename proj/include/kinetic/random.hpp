#ifndef KINETIC_RANDOM_HPP
#define KINETIC_RANDOM_HPP

#include <cstdint>
#include <random>

namespace kinetic {

/// Seeded stream. Distinct `stream` values give independent sequences for the
/// same seed; uniform() is built from raw 64-bit output so results do not depend
/// on the standard library's distribution implementations.
class Rng
{
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                          0x6b696eu};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace kinetic

#endif // KINETIC_RANDOM_HPP
