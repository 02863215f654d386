#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace microtrip {

/// Seeded random stream. Independent streams are derived from a base seed
/// plus a path of indices (e.g. {epoch, batch, item}) so results do not
/// depend on scheduling order.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

    double uniform();                      ///< [0, 1)
    double uniform(double lo, double hi);  ///< [lo, hi)
    double normal();                       ///< standard normal
    double normal(double mean, double stddev);
    std::uint64_t below(std::uint64_t n);  ///< uniform integer in [0, n)
    void fill_normal(std::span<double> out);
    std::vector<double> normals(std::size_t n);

    template <typename It>
    void shuffle(It first, It last) {
        std::shuffle(first, last, engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace microtrip
