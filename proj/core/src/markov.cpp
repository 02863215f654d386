#include "microtrip/markov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "microtrip/error.hpp"
#include "microtrip/parallel.hpp"

namespace microtrip {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& xs) {
    double m = kNegInf;
    for (double x : xs) {
        m = std::max(m, x);
    }
    if (m == kNegInf) {
        return kNegInf;
    }
    double s = 0.0;
    for (double x : xs) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

std::size_t draw_log_weights(const std::vector<double>& logw, Rng& rng) {
    double m = kNegInf;
    for (double x : logw) {
        m = std::max(m, x);
    }
    if (m == kNegInf) {
        fail(ErrorCode::Infeasible, "bridge kernel has no feasible successor");
    }
    std::vector<double> w(logw.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(logw[i] - m);
        total += w[i];
    }
    double u = rng.uniform() * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            last = i;
            u -= w[i];
            if (u < 0.0) {
                return i;
            }
        }
    }
    return last;
}

} // namespace

std::size_t discretize(double v, double delta_v) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(ErrorCode::InvalidArgument, "cannot discretize speed " + std::to_string(v));
    }
    if (!(delta_v > 0.0)) {
        fail(ErrorCode::InvalidArgument, "bin width must be positive");
    }
    return static_cast<std::size_t>(std::floor(v / delta_v));
}

double bin_center(std::size_t bin, double delta_v) {
    return (static_cast<double>(bin) + 0.5) * delta_v;
}

TransitionModel::TransitionModel(double delta_v, std::size_t k, double alpha,
                                 std::vector<double> counts, std::vector<double> start_counts)
    : delta_v_(delta_v),
      k_(k),
      alpha_(alpha),
      counts_(std::move(counts)),
      start_counts_(std::move(start_counts)) {
    if (k_ == 0 || counts_.size() != k_ * k_ * k_ || start_counts_.size() != k_) {
        fail(ErrorCode::InvalidArgument, "transition count table has the wrong shape");
    }
    if (alpha_ < 0.0) {
        fail(ErrorCode::InvalidArgument, "smoothing alpha must be >= 0");
    }
    normalize();
}

TransitionModel TransitionModel::from_probabilities(double delta_v, std::size_t k,
                                                    std::vector<double> probs,
                                                    std::vector<double> start_probs) {
    if (k == 0 || probs.size() != k * k * k || start_probs.size() != k) {
        fail(ErrorCode::InvalidArgument, "probability table has the wrong shape");
    }
    TransitionModel m;
    m.delta_v_ = delta_v;
    m.k_ = k;
    m.counts_ = probs;
    m.start_counts_ = start_probs;
    m.normalize();
    return m;
}

void TransitionModel::normalize() {
    probs_.assign(k_ * k_ * k_, 0.0);
    for (std::size_t row = 0; row < k_ * k_; ++row) {
        double total = 0.0;
        for (std::size_t c = 0; c < k_; ++c) {
            total += counts_[row * k_ + c];
        }
        const double denom = total + alpha_ * static_cast<double>(k_);
        if (denom <= 0.0) {
            continue;  // unseen context with alpha = 0: dead end
        }
        for (std::size_t c = 0; c < k_; ++c) {
            probs_[row * k_ + c] = (counts_[row * k_ + c] + alpha_) / denom;
        }
    }
    start_probs_.assign(k_, 0.0);
    double total = 0.0;
    for (double c : start_counts_) {
        total += c;
    }
    const double denom = total + alpha_ * static_cast<double>(k_);
    if (denom > 0.0) {
        for (std::size_t c = 0; c < k_; ++c) {
            start_probs_[c] = (start_counts_[c] + alpha_) / denom;
        }
    }
}

std::size_t TransitionModel::observed_triples() const {
    return static_cast<std::size_t>(
        std::count_if(counts_.begin(), counts_.end(), [](double c) { return c > 0.0; }));
}

nlohmann::json TransitionModel::to_json() const {
    nlohmann::json triples = nlohmann::json::array();
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (counts_[i] != 0.0) {
            const std::size_t a = i / (k_ * k_);
            const std::size_t b = (i / k_) % k_;
            const std::size_t c = i % k_;
            triples.push_back({a, b, c, counts_[i]});
        }
    }
    return {{"kind", "markov2"},        {"version", 1},          {"delta_v", delta_v_},
            {"bins", k_},               {"alpha", alpha_},       {"triples", triples},
            {"start_counts", start_counts_}};
}

TransitionModel TransitionModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("kind").get<std::string>() != "markov2") {
            fail(ErrorCode::Parse, "model file is not a second-order Markov model");
        }
        if (j.at("version").get<int>() != 1) {
            fail(ErrorCode::Version, "unsupported Markov model version");
        }
        const auto k = j.at("bins").get<std::size_t>();
        std::vector<double> counts(k * k * k, 0.0);
        for (const auto& t : j.at("triples")) {
            const auto a = t.at(0).get<std::size_t>();
            const auto b = t.at(1).get<std::size_t>();
            const auto c = t.at(2).get<std::size_t>();
            if (a >= k || b >= k || c >= k) {
                fail(ErrorCode::Parse, "Markov triple index out of range");
            }
            counts[(a * k + b) * k + c] = t.at(3).get<double>();
        }
        return TransitionModel(j.at("delta_v").get<double>(), k, j.at("alpha").get<double>(),
                               std::move(counts), j.at("start_counts").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, std::string("malformed Markov model: ") + e.what());
    }
}

TransitionModel fit_second_order(const std::vector<MicroTrip>& train, double delta_v,
                                 double alpha) {
    if (train.empty()) {
        fail(ErrorCode::DegenerateInput, "cannot fit a Markov model to an empty training set");
    }
    std::size_t k = 1;
    for (const auto& trip : train) {
        for (double v : trip.speeds()) {
            k = std::max(k, discretize(v, delta_v) + 1);
        }
    }
    std::vector<double> counts(k * k * k, 0.0);
    std::vector<double> start(k, 0.0);
    for (const auto& trip : train) {
        const auto v = trip.speeds();
        std::vector<std::size_t> s(v.size());
        for (std::size_t t = 0; t < v.size(); ++t) {
            s[t] = discretize(v[t], delta_v);
        }
        start[s[1]] += 1.0;
        for (std::size_t t = 2; t < s.size(); ++t) {
            counts[(s[t - 2] * k + s[t - 1]) * k + s[t]] += 1.0;
        }
    }
    return TransitionModel(delta_v, k, alpha, std::move(counts), std::move(start));
}

BackwardTable::BackwardTable(std::size_t k, std::size_t horizon)
    : k_(k), horizon_(horizon), log_beta_((horizon + 1) * k * k, kNegInf) {}

double BackwardTable::beta(std::size_t t, std::size_t pair_state, std::size_t T) const {
    if (t > T || T > horizon_) {
        fail(ErrorCode::InvalidArgument, "beta index outside the table horizon");
    }
    return std::exp(log_beta(T - t, pair_state));
}

double BackwardTable::log_start_mass(const TransitionModel& m, std::size_t T) const {
    if (T < 1 || T > horizon_) {
        fail(ErrorCode::InvalidArgument, "duration outside the table horizon");
    }
    std::vector<double> terms;
    for (std::size_t s1 = 0; s1 < k_; ++s1) {
        const double p = m.start_prob(s1);
        if (p > 0.0) {
            terms.push_back(std::log(p) + log_beta(T - 1, s1));  // pair (0, s1)
        }
    }
    return log_sum_exp(terms);
}

BackwardTable backward_messages(const TransitionModel& m, std::size_t T) {
    if (T < 2) {
        fail(ErrorCode::InvalidArgument, "bridge duration must be at least 2");
    }
    const std::size_t k = m.bins();
    const std::size_t states = k * k;
    BackwardTable table(k, T);

    // Sparse successor lists in log space.
    std::vector<std::vector<std::pair<std::size_t, double>>> succ(states);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                const double p = m.prob(a, b, c);
                if (p > 0.0) {
                    succ[a * k + b].push_back({b * k + c, std::log(p)});
                }
            }
        }
    }
    for (std::size_t x = 0; x < states; ++x) {
        table.log_beta(0, x) = (x % k == 0) ? 0.0 : kNegInf;
    }
    std::vector<double> terms;
    for (std::size_t r = 1; r <= T; ++r) {
        parallel_for(states, [&](std::size_t x) {
            double mx = kNegInf;
            for (const auto& [nx, lp] : succ[x]) {
                mx = std::max(mx, lp + table.log_beta(r - 1, nx));
            }
            if (mx == kNegInf) {
                table.log_beta(r, x) = kNegInf;
                return;
            }
            double s = 0.0;
            for (const auto& [nx, lp] : succ[x]) {
                s += std::exp(lp + table.log_beta(r - 1, nx) - mx);
            }
            table.log_beta(r, x) = mx + std::log(s);
        });
    }
    if (table.log_start_mass(m, T) == kNegInf) {
        fail(ErrorCode::Infeasible, "no path of duration " + std::to_string(T) +
                                        " returns to rest under this transition model");
    }
    return table;
}

std::vector<std::size_t> sample_bridge_bins(const TransitionModel& m, const BackwardTable& table,
                                            std::size_t T, Rng& rng) {
    if (T < 2 || T > table.horizon()) {
        fail(ErrorCode::InvalidArgument, "bridge duration " + std::to_string(T) +
                                             " outside the backward table horizon");
    }
    const std::size_t k = m.bins();
    if (table.log_start_mass(m, T) == kNegInf) {
        fail(ErrorCode::Infeasible, "no path of duration " + std::to_string(T) +
                                        " returns to rest under this transition model");
    }
    std::vector<std::size_t> s(T + 1, 0);
    std::vector<double> logw(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double p = m.start_prob(c);
        logw[c] = p > 0.0 ? std::log(p) + table.log_beta(T - 1, c) : kNegInf;
    }
    s[1] = draw_log_weights(logw, rng);
    for (std::size_t t = 1; t < T; ++t) {
        const std::size_t a = s[t - 1];
        const std::size_t b = s[t];
        const std::size_t remaining = T - t - 1;
        for (std::size_t c = 0; c < k; ++c) {
            const double p = m.prob(a, b, c);
            logw[c] = p > 0.0 ? std::log(p) + table.log_beta(remaining, b * k + c) : kNegInf;
        }
        s[t + 1] = draw_log_weights(logw, rng);
    }
    return s;
}

MicroTrip sample_bridge(const TransitionModel& m, const BackwardTable& table, std::size_t T,
                        Rng& rng) {
    const auto bins = sample_bridge_bins(m, table, T, rng);
    std::vector<double> v(bins.size());
    for (std::size_t t = 0; t < bins.size(); ++t) {
        v[t] = bin_center(bins[t], m.delta_v());
    }
    v.front() = 0.0;
    v.back() = 0.0;
    return MicroTrip(std::move(v));
}

std::vector<MicroTrip> sample_bridges(const TransitionModel& m, const BackwardTable& table,
                                      const std::vector<std::size_t>& durations,
                                      std::uint64_t seed) {
    std::vector<std::vector<double>> out(durations.size());
    parallel_for(durations.size(), [&](std::size_t i) {
        Rng rng(seed, {i});
        const auto trip = sample_bridge(m, table, durations[i], rng);
        out[i].assign(trip.speeds().begin(), trip.speeds().end());
    });
    std::vector<MicroTrip> trips;
    trips.reserve(out.size());
    for (auto& v : out) {
        trips.emplace_back(std::move(v));
    }
    return trips;
}

MicroTrip smooth_markov(const MicroTrip& trip) {
    const auto v = trip.speeds();
    if (v.size() < 5) {
        return trip;
    }
    const auto a = derive_acceleration(v);
    const std::size_t n = a.size();
    std::vector<double> out(v.size(), 0.0);
    double cur = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t lo = t >= 2 ? t - 2 : 0;
        const std::size_t hi = std::min(n - 1, t + 2);
        double s = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) {
            s += a[i];
        }
        cur += s / static_cast<double>(hi - lo + 1);
        out[t + 1] = std::max(0.0, cur);
    }
    out.back() = 0.0;
    return MicroTrip(std::move(out));
}

} // namespace microtrip
