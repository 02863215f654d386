#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "microtrip/error.hpp"
#include "microtrip/markov.hpp"
#include "oracles.hpp"

using namespace microtrip;

namespace {

struct ToyChain {
    std::size_t k;
    std::vector<double> probs;
    std::vector<double> start;
};

/// Random second-order chain; successors limited to |c - b| <= reach.
ToyChain random_chain(std::size_t k, std::size_t reach, std::uint64_t seed) {
    Rng rng(seed);
    ToyChain c{k, std::vector<double>(k * k * k, 0.0), std::vector<double>(k, 0.0)};
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            double total = 0.0;
            for (std::size_t n = 0; n < k; ++n) {
                const std::size_t d = n > b ? n - b : b - n;
                if (d <= reach) {
                    const double w = 0.2 + rng.uniform();
                    c.probs[(a * k + b) * k + n] = w;
                    total += w;
                }
            }
            for (std::size_t n = 0; n < k; ++n) {
                c.probs[(a * k + b) * k + n] /= total;
            }
        }
    }
    double total = 0.0;
    for (std::size_t n = 0; n < k; ++n) {
        c.start[n] = 0.2 + rng.uniform();
        total += c.start[n];
    }
    for (auto& p : c.start) {
        p /= total;
    }
    return c;
}

TransitionModel to_model(const ToyChain& c) {
    return TransitionModel::from_probabilities(1.0, c.k, c.probs, c.start);
}

} // namespace

TEST(Discretize, Basics) {
    EXPECT_EQ(discretize(0.0), 0u);
    EXPECT_EQ(discretize(1.3, 0.5), 2u);
    EXPECT_THROW(discretize(-0.1), Error);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(0.0, 40.0);
        EXPECT_LE(std::abs(bin_center(discretize(v)) - v), 0.25 + 1e-12);
    }
}

TEST(FitSecondOrder, SingleTripHasThreeTriples) {
    const std::vector<MicroTrip> trips = {MicroTrip({0, 0.6, 1.2, 0.6, 0})};
    const auto m = fit_second_order(trips, 0.5, 0.0);
    EXPECT_EQ(m.bins(), 3u);
    EXPECT_EQ(m.observed_triples(), 3u);
    double total = 0.0;
    for (double c : m.counts()) {
        total += c;
    }
    EXPECT_EQ(total, 3.0);
    // bins: 0,1,2,1,0
    EXPECT_EQ(m.prob(0, 1, 2), 1.0);
    EXPECT_EQ(m.prob(1, 2, 1), 1.0);
    EXPECT_EQ(m.prob(2, 1, 0), 1.0);
    EXPECT_EQ(m.start_prob(1), 1.0);
}

TEST(FitSecondOrder, StaircaseRowsArePointMasses) {
    std::vector<double> v = {0};
    for (int i = 1; i <= 8; ++i) {
        v.push_back(0.5 * i + 0.1);
    }
    for (int i = 7; i >= 1; --i) {
        v.push_back(0.5 * i + 0.1);
    }
    v.push_back(0);
    const auto m = fit_second_order({MicroTrip(v)}, 0.5, 0.0);
    for (std::size_t a = 0; a < m.bins(); ++a) {
        for (std::size_t b = 0; b < m.bins(); ++b) {
            double total = 0.0;
            double mx = 0.0;
            for (std::size_t c = 0; c < m.bins(); ++c) {
                total += m.prob(a, b, c);
                mx = std::max(mx, m.prob(a, b, c));
            }
            if (total > 0.0) {
                EXPECT_NEAR(total, 1.0, 1e-12);
                EXPECT_EQ(mx, 1.0);
            }
        }
    }
}

TEST(FitSecondOrder, LaplaceSmoothingMakesEverySuccessorPositive) {
    const auto m = fit_second_order({MicroTrip({0, 0.6, 1.2, 0.6, 0})}, 0.5, 1e-3);
    for (std::size_t a = 0; a < m.bins(); ++a) {
        for (std::size_t b = 0; b < m.bins(); ++b) {
            double total = 0.0;
            for (std::size_t c = 0; c < m.bins(); ++c) {
                EXPECT_GT(m.prob(a, b, c), 0.0);
                total += m.prob(a, b, c);
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(FitSecondOrder, JsonRoundTrip) {
    const auto m = fit_second_order({MicroTrip({0, 0.6, 1.2, 3.0, 0.6, 0})}, 0.5, 0.01);
    const auto back = TransitionModel::from_json(nlohmann::json::parse(m.to_json().dump()));
    EXPECT_EQ(back.bins(), m.bins());
    EXPECT_EQ(back.counts(), m.counts());
    EXPECT_EQ(back.start_counts(), m.start_counts());
    EXPECT_EQ(back.alpha(), m.alpha());
}

TEST(BackwardMessages, MatchesMatrixPowersOnTwoBinChain) {
    const auto chain = random_chain(2, 1, 4);
    const auto m = to_model(chain);
    const auto table = backward_messages(m, 3);
    for (std::size_t r = 0; r <= 3; ++r) {
        const auto expected = oracle::beta_by_matrix_power(chain.probs, 2, r);
        for (std::size_t x = 0; x < 4; ++x) {
            EXPECT_NEAR(std::exp(table.log_beta(r, x)), expected[x], 1e-12) << r << "," << x;
        }
    }
    // beta_t indexing for a T = 3 bridge: t = T means zero steps remaining.
    EXPECT_EQ(table.beta(3, 0, 3), 1.0);
    EXPECT_EQ(table.beta(3, 1, 3), 0.0);
}

TEST(BackwardMessages, RecursionHoldsAtEveryCell) {
    const auto chain = random_chain(5, 2, 8);
    const auto m = to_model(chain);
    const std::size_t T = 30;
    const auto table = backward_messages(m, T);
    for (std::size_t r = 1; r <= T; ++r) {
        for (std::size_t a = 0; a < 5; ++a) {
            for (std::size_t b = 0; b < 5; ++b) {
                double rhs = 0.0;
                for (std::size_t c = 0; c < 5; ++c) {
                    rhs += m.prob(a, b, c) * std::exp(table.log_beta(r - 1, b * 5 + c));
                }
                const double lhs = std::exp(table.log_beta(r, a * 5 + b));
                EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, rhs));
                EXPECT_GE(lhs, 0.0);
                EXPECT_LE(lhs, 1.0 + 1e-12);
            }
        }
    }
}

TEST(BackwardMessages, AbsorbingRestStaysCertain) {
    // From (0,0) the chain stays at 0 forever.
    ToyChain c = random_chain(3, 2, 5);
    for (std::size_t n = 0; n < 3; ++n) {
        c.probs[n] = n == 0 ? 1.0 : 0.0;
    }
    const auto table = backward_messages(to_model(c), 12);
    for (std::size_t r = 0; r <= 12; ++r) {
        EXPECT_NEAR(std::exp(table.log_beta(r, 0)), 1.0, 1e-12);
    }
}

TEST(BackwardMessages, NoReturnIsInfeasible) {
    // Speeds only ever increase.
    const std::size_t k = 3;
    std::vector<double> probs(k * k * k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            probs[(a * k + b) * k + std::min(b + 1, k - 1)] = 1.0;
        }
    }
    const auto m = TransitionModel::from_probabilities(1.0, k, probs, {0.0, 1.0, 0.0});
    try {
        backward_messages(m, 6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    }
}

TEST(BackwardMessages, LongHorizonAvoidsUnderflow) {
    // Bin 1 reaches rest with probability 1/2 per step; rest leads to the
    // absorbing bin 2. A bridge of duration T therefore has probability
    // 2^-(T-1), far below the smallest double for T = 4000.
    const std::size_t k = 3;
    std::vector<double> probs(k * k * k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        probs[(a * k + 0) * k + 2] = 1.0;
        probs[(a * k + 1) * k + 0] = 0.5;
        probs[(a * k + 1) * k + 1] = 0.5;
        probs[(a * k + 2) * k + 2] = 1.0;
    }
    const auto m = TransitionModel::from_probabilities(1.0, k, probs, {0.0, 1.0, 0.0});
    const std::size_t T = 4000;
    const auto table = backward_messages(m, T);
    EXPECT_NEAR(table.log_start_mass(m, T), -static_cast<double>(T - 1) * std::log(2.0), 1e-6);
    Rng rng(1);
    const auto bins = sample_bridge_bins(m, table, T, rng);
    for (std::size_t t = 1; t < T; ++t) {
        ASSERT_EQ(bins[t], 1u);
    }
}

TEST(SampleBridge, EndsAtRestAndHasRightLength) {
    const auto chain = random_chain(4, 1, 2);
    const auto m = to_model(chain);
    const auto table = backward_messages(m, 40);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const std::size_t T = 2 + rng.below(39);
        const auto bins = sample_bridge_bins(m, table, T, rng);
        ASSERT_EQ(bins.size(), T + 1);
        EXPECT_EQ(bins.front(), 0u);
        EXPECT_EQ(bins.back(), 0u);
        const auto trip = sample_bridge(m, table, T, rng);
        EXPECT_EQ(trip.speeds().front(), 0.0);
        EXPECT_EQ(trip.speeds().back(), 0.0);
        EXPECT_TRUE(validate_micro_trip(trip.speeds()).valid);
    }
}

TEST(SampleBridge, DurationTwoFollowsDirectKernel) {
    const auto chain = random_chain(4, 3, 6);
    const auto m = to_model(chain);
    const auto table = backward_messages(m, 2);
    std::vector<double> kernel(4);
    double z = 0.0;
    for (std::size_t b = 0; b < 4; ++b) {
        kernel[b] = chain.start[b] * chain.probs[(0 * 4 + b) * 4 + 0];
        z += kernel[b];
    }
    Rng rng(10);
    std::vector<double> hits(4, 0.0);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto bins = sample_bridge_bins(m, table, 2, rng);
        ASSERT_EQ(bins[0], 0u);
        ASSERT_EQ(bins[2], 0u);
        ASSERT_GT(kernel[bins[1]], 0.0);
        hits[bins[1]] += 1.0;
    }
    for (std::size_t b = 0; b < 4; ++b) {
        const double p = kernel[b] / z;
        EXPECT_NEAR(hits[b] / n, p, 4.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
}

TEST(SampleBridge, MarginalsMatchEnumerationWithinThreeSigma) {
    const auto chain = random_chain(4, 3, 21);
    const auto m = to_model(chain);
    const std::size_t T = 8;
    const auto table = backward_messages(m, T);
    const auto law = oracle::enumerate_bridge_paths(chain.probs, chain.start, 4, T);
    const auto expected = oracle::path_marginals(law, 4);
    const int n = 10000;
    std::vector<std::vector<double>> hits(T + 1, std::vector<double>(4, 0.0));
    Rng rng(99);
    for (int i = 0; i < n; ++i) {
        const auto bins = sample_bridge_bins(m, table, T, rng);
        for (std::size_t t = 0; t <= T; ++t) {
            hits[t][bins[t]] += 1.0;
        }
    }
    for (std::size_t t = 0; t <= T; ++t) {
        for (std::size_t b = 0; b < 4; ++b) {
            const double p = expected[t][b];
            const double se = std::sqrt(std::max(0.0, p * (1 - p)) / n);
            EXPECT_NEAR(hits[t][b] / n, p, 3.0 * se + 1e-12) << "t=" << t << " b=" << b;
        }
    }
}

TEST(SampleBridge, PathLawTotalVariationOnSparseChain) {
    // Few feasible paths keep the sampling noise of the empirical TV itself
    // (about 0.4 * sqrt(paths / n)) well under the 0.02 bound.
    const auto chain = random_chain(3, 1, 33);
    const auto m = to_model(chain);
    const std::size_t T = 4;
    const auto table = backward_messages(m, T);
    const auto law = oracle::enumerate_bridge_paths(chain.probs, chain.start, 3, T);
    std::map<std::vector<std::size_t>, double> freq;
    const int n = 10000;
    Rng rng(5);
    for (int i = 0; i < n; ++i) {
        freq[sample_bridge_bins(m, table, T, rng)] += 1.0 / n;
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < law.paths.size(); ++i) {
        const auto it = freq.find(law.paths[i]);
        const double emp = it == freq.end() ? 0.0 : it->second;
        tv += std::abs(emp - law.probs[i]);
        if (it != freq.end()) {
            freq.erase(it);
        }
    }
    EXPECT_TRUE(freq.empty()) << "sampled a path with zero bridge probability";
    tv *= 0.5;
    EXPECT_LT(tv, 0.02) << "paths=" << law.paths.size();
}

TEST(SampleBridges, DeterministicPerIndexStreams) {
    const auto chain = random_chain(4, 1, 2);
    const auto m = to_model(chain);
    const auto table = backward_messages(m, 30);
    const std::vector<std::size_t> durations = {10, 20, 30, 5};
    const auto a = sample_bridges(m, table, durations, 7);
    const auto b = sample_bridges(m, table, durations, 7);
    ASSERT_EQ(a.size(), 4u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(std::equal(a[i].speeds().begin(), a[i].speeds().end(), b[i].speeds().begin(),
                               b[i].speeds().end()));
        EXPECT_EQ(a[i].size(), durations[i] + 1);
    }
}

TEST(SmoothMarkov, LinearSegmentsUnchanged) {
    // Trapezoid: ramps and cruise are linear away from the two corners.
    std::vector<double> v;
    for (int i = 0; i <= 10; ++i) v.push_back(i);
    for (int i = 0; i < 10; ++i) v.push_back(10);
    for (int i = 9; i >= 0; --i) v.push_back(i);
    const auto out = smooth_markov(MicroTrip(v));
    const auto s = out.speeds();
    ASSERT_EQ(s.size(), v.size());
    for (std::size_t t = 1; t + 1 < v.size(); ++t) {
        const bool near_corner = (t >= 8 && t <= 13) || (t >= 18 && t <= 23);
        if (!near_corner) {
            EXPECT_NEAR(s[t], v[t], 1e-9) << "t=" << t;
        }
    }
}

TEST(SmoothMarkov, AlternatingAccelerationContracts) {
    std::vector<double> v = {0};
    for (int i = 0; i < 40; ++i) {
        v.push_back(i % 2 == 0 ? 6.0 : 5.0);
    }
    v.push_back(0);
    const MicroTrip trip(v);
    const auto out = smooth_markov(trip);
    const auto a_in = derive_acceleration(trip.speeds());
    const auto a_out = derive_acceleration(out.speeds());
    double in_mag = 0.0;
    double out_mag = 0.0;
    for (std::size_t t = 5; t + 5 < a_in.size(); ++t) {
        in_mag += std::abs(a_in[t]);
        out_mag += std::abs(a_out[t]);
    }
    EXPECT_LT(out_mag, in_mag);
}

TEST(SmoothMarkov, OutputAlwaysValidAndShortTripsUnchanged) {
    const auto chain = random_chain(6, 2, 14);
    const auto m = to_model(chain);
    const auto table = backward_messages(m, 60);
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto trip = sample_bridge(m, table, 2 + rng.below(59), rng);
        EXPECT_TRUE(validate_micro_trip(smooth_markov(trip).speeds()).valid);
    }
    const MicroTrip tiny({0, 3, 2, 0});
    const auto out = smooth_markov(tiny);
    EXPECT_TRUE(std::equal(out.speeds().begin(), out.speeds().end(), tiny.speeds().begin()));
}
