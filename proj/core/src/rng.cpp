#include "microtrip/rng.hpp"

#include <algorithm>

namespace microtrip {

namespace {

std::seed_seq make_seq(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size() + 1);
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    words.push_back(static_cast<std::uint32_t>(path.size()));
    for (auto p : path) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    return std::seed_seq(words.begin(), words.end());
}

} // namespace

Rng::Rng(std::uint64_t seed) : Rng(seed, {}) {}

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    auto seq = make_seq(seed, path);
    engine_.seed(seq);
}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal() { return normal_(engine_); }

double Rng::normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }

std::uint64_t Rng::below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

void Rng::fill_normal(std::span<double> out) {
    for (auto& x : out) {
        x = normal_(engine_);
    }
}

std::vector<double> Rng::normals(std::size_t n) {
    std::vector<double> out(n);
    fill_normal(out);
    return out;
}

} // namespace microtrip
