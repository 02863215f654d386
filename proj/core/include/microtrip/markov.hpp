#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "microtrip/rng.hpp"
#include "microtrip/trajectory.hpp"

namespace microtrip {

inline constexpr double kDefaultDeltaV = 0.5;

/// floor(v / delta_v); negative speeds are an error.
std::size_t discretize(double v, double delta_v = kDefaultDeltaV);
double bin_center(std::size_t bin, double delta_v = kDefaultDeltaV);

/// Second-order chain over speed bins. Pair-state x = (s_{t-1}, s_t) is
/// flattened as s_{t-1} * K + s_t.
class TransitionModel {
public:
    TransitionModel() = default;

    /// Builds a model from raw counts. counts has K^3 entries indexed
    /// [a * K * K + b * K + c] for the triple (a, b, c); start_counts has K
    /// entries counting the first moving bin s_1 of each trip.
    TransitionModel(double delta_v, std::size_t k, double alpha, std::vector<double> counts,
                    std::vector<double> start_counts);

    /// Builds a model from explicit probabilities (rows may be all-zero).
    static TransitionModel from_probabilities(double delta_v, std::size_t k,
                                              std::vector<double> probs,
                                              std::vector<double> start_probs);

    double delta_v() const { return delta_v_; }
    std::size_t bins() const { return k_; }
    double alpha() const { return alpha_; }
    const std::vector<double>& counts() const { return counts_; }
    const std::vector<double>& start_counts() const { return start_counts_; }

    /// P(s_t = c | s_{t-2} = a, s_{t-1} = b).
    double prob(std::size_t a, std::size_t b, std::size_t c) const {
        return probs_[(a * k_ + b) * k_ + c];
    }
    /// P(s_1 = c | trip start).
    double start_prob(std::size_t c) const { return start_probs_[c]; }

    /// Number of distinct triples with a non-zero count.
    std::size_t observed_triples() const;

    nlohmann::json to_json() const;
    static TransitionModel from_json(const nlohmann::json& j);

private:
    void normalize();

    double delta_v_ = kDefaultDeltaV;
    std::size_t k_ = 0;
    double alpha_ = 0.0;
    std::vector<double> counts_;
    std::vector<double> start_counts_;
    std::vector<double> probs_;
    std::vector<double> start_probs_;
};

/// Counts every consecutive bin triple of every trip; the first transition
/// of each trip also feeds the start distribution.
TransitionModel fit_second_order(const std::vector<MicroTrip>& train,
                                 double delta_v = kDefaultDeltaV, double alpha = 0.0);

/// log beta indexed by steps remaining r: log P(pair-state x reaches a state
/// ending in bin 0 after exactly r more transitions). One table of horizon R
/// serves every duration T <= R.
class BackwardTable {
public:
    BackwardTable(std::size_t k, std::size_t horizon);

    std::size_t bins() const { return k_; }
    std::size_t horizon() const { return horizon_; }

    double log_beta(std::size_t remaining, std::size_t pair_state) const {
        return log_beta_[remaining * k_ * k_ + pair_state];
    }
    double& log_beta(std::size_t remaining, std::size_t pair_state) {
        return log_beta_[remaining * k_ * k_ + pair_state];
    }
    /// beta_t(x) for a bridge of duration T.
    double beta(std::size_t t, std::size_t pair_state, std::size_t T) const;

    /// log P(a trip of duration T starting at rest ends at rest).
    double log_start_mass(const TransitionModel& m, std::size_t T) const;

private:
    std::size_t k_;
    std::size_t horizon_;
    std::vector<double> log_beta_;
};

/// Throws Infeasible when a trip of duration T cannot return to rest.
BackwardTable backward_messages(const TransitionModel& m, std::size_t T);

/// Bin path s_0..s_T drawn from the bridge kernel P(x'|x) beta_{t+1}(x').
std::vector<std::size_t> sample_bridge_bins(const TransitionModel& m, const BackwardTable& table,
                                            std::size_t T, Rng& rng);

MicroTrip sample_bridge(const TransitionModel& m, const BackwardTable& table, std::size_t T,
                        Rng& rng);

/// One trip per duration; trip i uses the stream (seed, i).
std::vector<MicroTrip> sample_bridges(const TransitionModel& m, const BackwardTable& table,
                                      const std::vector<std::size_t>& durations,
                                      std::uint64_t seed);

/// Centered 5-point moving average of acceleration (window shrinks at the
/// edges), re-integrated from 0, clamped at 0, final sample re-zeroed.
/// Trips shorter than 5 samples are returned unchanged.
MicroTrip smooth_markov(const MicroTrip& trip);

} // namespace microtrip
