#include "microtrip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>

#include "microtrip/error.hpp"
#include "microtrip/rng.hpp"

namespace microtrip {

namespace {

constexpr double kMpsToKmh = 3.6;

// Integral of |F_a - F_b| for weighted point masses. Each CDF is accumulated
// separately over its own sorted points so identical inputs give exactly 0.
double cdf_gap_integral(std::vector<std::pair<double, double>> a,
                        std::vector<std::pair<double, double>> b, double ta, double tb) {
    const auto by_x = [](const auto& l, const auto& r) { return l.first < r.first; };
    std::sort(a.begin(), a.end(), by_x);
    std::sort(b.begin(), b.end(), by_x);
    std::size_t i = 0;
    std::size_t j = 0;
    double ca = 0.0;
    double cb = 0.0;
    double total = 0.0;
    double x = std::min(a.front().first, b.front().first);
    while (i < a.size() || j < b.size()) {
        while (i < a.size() && a[i].first == x) {
            ca += a[i++].second;
        }
        while (j < b.size() && b[j].first == x) {
            cb += b[j++].second;
        }
        if (i == a.size() && j == b.size()) {
            break;
        }
        const double next = j == b.size() || (i < a.size() && a[i].first < b[j].first) ? a[i].first
                                                                                      : b[j].first;
        total += std::abs(ca / ta - cb / tb) * (next - x);
        x = next;
    }
    return total;
}

std::size_t bin_of(double x, double lo, double width, std::size_t bins) {
    const double f = std::floor((x - lo) / width);
    if (!(f >= 0)) {
        return 0;
    }
    return std::min(bins - 1, static_cast<std::size_t>(f));
}

double sq_dist(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        s += d * d;
    }
    return s;
}

std::vector<double> pooled(const std::vector<MicroTrip>& trips, bool accel) {
    std::vector<double> out;
    for (const auto& t : trips) {
        const auto v = t.speeds();
        if (accel) {
            const auto a = derive_acceleration(v);
            out.insert(out.end(), a.begin(), a.end());
        } else {
            out.insert(out.end(), v.begin(), v.end());
        }
    }
    return out;
}

std::vector<double> pooled_vsp(const std::vector<MicroTrip>& trips) {
    std::vector<double> out;
    for (const auto& t : trips) {
        const auto p = trip_vsp(t.speeds());
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

double population_std(std::span<const double> x) {
    if (x.empty()) {
        return 0.0;
    }
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) {
        s += (v - m) * (v - m);
    }
    return std::sqrt(s / static_cast<double>(x.size()));
}

struct LdljSummary {
    double mean = 0.0;
    std::size_t skipped = 0;
};

LdljSummary ldlj_mean(const std::vector<MicroTrip>& trips) {
    double s = 0.0;
    std::size_t n = 0;
    std::size_t skipped = 0;
    for (const auto& t : trips) {
        try {
            s += ldlj(t.speeds());
            ++n;
        } catch (const Error&) {
            ++skipped;
        }
    }
    return {n > 0 ? s / static_cast<double>(n) : 0.0, skipped};
}

double dataset_max_speed(const std::vector<MicroTrip>& trips) {
    double m = 0.0;
    for (const auto& t : trips) {
        m = std::max(m, t.stats().max_speed_mps);
    }
    return m;
}

WeightedPoints cloud_of(const SafdHistogram& h) {
    WeightedPoints p;
    for (std::size_t i = 0; i < h.grid.v_bins; ++i) {
        for (std::size_t j = 0; j < h.grid.a_bins; ++j) {
            const double m = h.mass[i * h.grid.a_bins + j];
            if (m > 0) {
                p.x.push_back(h.grid.v_center(i));
                p.y.push_back(h.grid.a_center(j));
                p.w.push_back(m);
            }
        }
    }
    return p;
}

} // namespace

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        fail(ErrorCode::InvalidArgument, "wasserstein_1d: empty sample");
    }
    const std::vector<double> wa(a.size(), 1.0);
    const std::vector<double> wb(b.size(), 1.0);
    return wasserstein_1d_weighted(a, wa, b, wb);
}

double wasserstein_1d_weighted(std::span<const double> xa, std::span<const double> wa,
                               std::span<const double> xb, std::span<const double> wb) {
    if (xa.empty() || xb.empty() || xa.size() != wa.size() || xb.size() != wb.size()) {
        fail(ErrorCode::InvalidArgument, "wasserstein_1d: empty sample or weight mismatch");
    }
    const double ta = std::accumulate(wa.begin(), wa.end(), 0.0);
    const double tb = std::accumulate(wb.begin(), wb.end(), 0.0);
    if (!(ta > 0) || !(tb > 0)) {
        fail(ErrorCode::InvalidArgument, "wasserstein_1d: weights must have positive total");
    }
    std::vector<std::pair<double, double>> pa;
    std::vector<std::pair<double, double>> pb;
    pa.reserve(xa.size());
    pb.reserve(xb.size());
    for (std::size_t i = 0; i < xa.size(); ++i) {
        pa.emplace_back(xa[i], wa[i]);
    }
    for (std::size_t i = 0; i < xb.size(); ++i) {
        pb.emplace_back(xb[i], wb[i]);
    }
    return cdf_gap_integral(std::move(pa), std::move(pb), ta, tb);
}

nlohmann::json SafdGrid::to_json() const {
    return {{"v_min", v_min},   {"v_max", v_max},   {"v_bins", v_bins},
            {"a_min", a_min},   {"a_max", a_max},   {"a_bins", a_bins}};
}

SafdGrid SafdGrid::from_json(const nlohmann::json& j) {
    SafdGrid g;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "v_min") {
                g.v_min = value.get<double>();
            } else if (key == "v_max") {
                g.v_max = value.get<double>();
            } else if (key == "v_bins") {
                g.v_bins = value.get<std::size_t>();
            } else if (key == "a_min") {
                g.a_min = value.get<double>();
            } else if (key == "a_max") {
                g.a_max = value.get<double>();
            } else if (key == "a_bins") {
                g.a_bins = value.get<std::size_t>();
            } else {
                fail(ErrorCode::Config, "safd: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("safd: ") + e.what());
    }
    g.validate();
    return g;
}

void SafdGrid::validate() const {
    if (v_bins == 0 || a_bins == 0 || !(v_max > v_min) || !(a_max > a_min)) {
        fail(ErrorCode::Config, "safd: grid needs positive bin counts and ranges");
    }
}

SafdHistogram safd_from_pairs(std::span<const double> v, std::span<const double> a,
                              const SafdGrid& grid) {
    grid.validate();
    if (v.size() != a.size() || v.empty()) {
        fail(ErrorCode::InvalidArgument, "safd: need equally many speeds and accelerations");
    }
    SafdHistogram h{grid, std::vector<double>(grid.v_bins * grid.a_bins, 0.0)};
    for (std::size_t t = 0; t < v.size(); ++t) {
        const auto i = bin_of(v[t], grid.v_min, grid.v_width(), grid.v_bins);
        const auto j = bin_of(a[t], grid.a_min, grid.a_width(), grid.a_bins);
        h.mass[i * grid.a_bins + j] += 1.0;
    }
    for (double& m : h.mass) {
        m /= static_cast<double>(v.size());
    }
    return h;
}

SafdHistogram safd_histogram(const std::vector<MicroTrip>& trips, const SafdGrid& grid) {
    std::vector<double> v;
    std::vector<double> a;
    for (const auto& t : trips) {
        const auto s = t.speeds();
        const auto acc = derive_acceleration(s);
        v.insert(v.end(), s.begin(), s.end() - 1);
        a.insert(a.end(), acc.begin(), acc.end());
    }
    return safd_from_pairs(v, a, grid);
}

double sliced_wasserstein_2d(const WeightedPoints& a, const WeightedPoints& b,
                             std::size_t directions, std::uint64_t seed) {
    if (directions == 0) {
        fail(ErrorCode::InvalidArgument, "sliced wasserstein: need at least one direction");
    }
    Rng rng(seed, {0x736c6963});
    std::vector<double> pa(a.x.size());
    std::vector<double> pb(b.x.size());
    double total = 0.0;
    for (std::size_t d = 0; d < directions; ++d) {
        const double theta =
            (static_cast<double>(d) + rng.uniform()) * std::numbers::pi / static_cast<double>(directions);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            pa[i] = c * a.x[i] + s * a.y[i];
        }
        for (std::size_t i = 0; i < pb.size(); ++i) {
            pb[i] = c * b.x[i] + s * b.y[i];
        }
        total += wasserstein_1d_weighted(pa, a.w, pb, b.w);
    }
    return total / static_cast<double>(directions) * std::numbers::pi / 2.0;
}

double wasserstein_2d_safd(const SafdHistogram& real, const SafdHistogram& synth,
                           std::size_t directions, std::uint64_t seed) {
    if (!(real.grid == synth.grid) || real.mass.size() != synth.mass.size()) {
        fail(ErrorCode::InvalidArgument, "wasserstein_2d_safd: grid mismatch");
    }
    return sliced_wasserstein_2d(cloud_of(real), cloud_of(synth), directions, seed);
}

double mmd_rbf(const Matrix& a, const Matrix& b, double bandwidth) {
    if (a.size() < 2 || b.size() < 2) {
        fail(ErrorCode::InvalidArgument, "mmd_rbf: need at least 2 points per side");
    }
    if (!(bandwidth > 0)) {
        fail(ErrorCode::InvalidArgument, "mmd_rbf: bandwidth must be positive");
    }
    const double g = 1.0 / (2.0 * bandwidth * bandwidth);
    const auto k = [&](const std::vector<double>& x, const std::vector<double>& y) {
        return std::exp(-g * sq_dist(x, y));
    };
    const double m = static_cast<double>(a.size());
    const double n = static_cast<double>(b.size());
    double saa = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (i != j) {
                saa += k(a[i], a[j]);
            }
        }
    }
    double sbb = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (i != j) {
                sbb += k(b[i], b[j]);
            }
        }
    }
    double sab = 0.0;
    for (const auto& x : a) {
        for (const auto& y : b) {
            sab += k(x, y);
        }
    }
    const double mmd2 = saa / (m * (m - 1)) + sbb / (n * (n - 1)) - 2.0 * sab / (m * n);
    return std::max(mmd2, 0.0);
}

std::vector<double> vsp(std::span<const double> v, std::span<const double> a, double grade) {
    if (v.size() != a.size()) {
        fail(ErrorCode::InvalidArgument, "vsp: speed and acceleration lengths differ");
    }
    std::vector<double> out(v.size());
    for (std::size_t t = 0; t < v.size(); ++t) {
        out[t] = v[t] * (1.1 * a[t] + 9.81 * grade + 0.132) + 0.000302 * v[t] * v[t] * v[t];
    }
    return out;
}

std::vector<double> trip_vsp(std::span<const double> speeds) {
    const auto a = derive_acceleration(speeds);
    return vsp(speeds.first(a.size()), a);
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        fail(ErrorCode::InvalidArgument, "ks_statistic: empty sample");
    }
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() || j < y.size()) {
        const double next = j >= y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
        while (i < x.size() && x[i] == next) {
            ++i;
        }
        while (j < y.size() && y[j] == next) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(x.size()) -
                                 static_cast<double>(j) / static_cast<double>(y.size())));
    }
    return d;
}

double ldlj(std::span<const double> v) {
    if (v.size() < 4) {
        fail(ErrorCode::DegenerateInput, "ldlj: duration below 3 s");
    }
    const double peak = *std::max_element(v.begin(), v.end());
    if (!(peak > 0)) {
        fail(ErrorCode::DegenerateInput, "ldlj: zero peak speed");
    }
    const auto j = derive_jerk(derive_acceleration(v));
    double s = 0.0;
    for (double x : j) {
        s += x * x;
    }
    if (!(s > 0)) {
        fail(ErrorCode::DegenerateInput, "ldlj: zero jerk");
    }
    const double T = static_cast<double>(v.size() - 1);
    return std::log(T * T * T / (peak * peak) * s);
}

double boundary_violation_rate(std::span<const SpeedTrajectory> set, double thresh) {
    if (set.empty()) {
        return 0.0;
    }
    std::size_t bad = 0;
    for (const auto& t : set) {
        const auto v = t.samples();
        if (std::abs(v.front()) > thresh || std::abs(v.back()) > thresh) {
            ++bad;
        }
    }
    return 100.0 * static_cast<double>(bad) / static_cast<double>(set.size());
}

double boundary_violation_rate(const std::vector<MicroTrip>& set, double thresh) {
    std::vector<SpeedTrajectory> t;
    t.reserve(set.size());
    for (const auto& m : set) {
        t.push_back(m.trajectory());
    }
    return boundary_violation_rate(std::span<const SpeedTrajectory>(t), thresh);
}

std::vector<double> trip_summary(const MicroTrip& trip) {
    std::vector<double> out(kSummaryDims, 0.0);
    if (trip.stats().distance_m > 0) {
        const auto f = extract_features(trip).as_array();
        std::copy(f.begin(), f.end(), out.begin());
    } else {
        out[3] = 1.0;
    }
    out[6] = trip.stats().duration_s;
    const auto p = trip_vsp(trip.speeds());
    out[7] = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
    return out;
}

Matrix summary_matrix(const std::vector<MicroTrip>& trips) {
    Matrix m;
    m.reserve(trips.size());
    for (const auto& t : trips) {
        m.push_back(trip_summary(t));
    }
    return m;
}

void zscore_pooled(Matrix& a, Matrix& b) {
    if (a.empty() && b.empty()) {
        return;
    }
    const std::size_t dims = (a.empty() ? b : a).front().size();
    const double n = static_cast<double>(a.size() + b.size());
    for (std::size_t k = 0; k < dims; ++k) {
        double s = 0.0;
        for (const auto* m : {&a, &b}) {
            for (const auto& row : *m) {
                s += row[k];
            }
        }
        const double mean = s / n;
        double q = 0.0;
        for (const auto* m : {&a, &b}) {
            for (const auto& row : *m) {
                q += (row[k] - mean) * (row[k] - mean);
            }
        }
        const double sd = std::sqrt(q / n);
        for (auto* m : {&a, &b}) {
            for (auto& row : *m) {
                row[k] = sd > 0 ? (row[k] - mean) / sd : 0.0;
            }
        }
    }
}

double discriminative_score(const std::vector<MicroTrip>& real, const std::vector<MicroTrip>& synth,
                            const ForestConfig& forest, double train_frac) {
    if (real.size() < 20 || synth.size() < 20) {
        fail(ErrorCode::InvalidArgument, "discriminative_score: need at least 20 trips per side");
    }
    if (!(train_frac > 0 && train_frac < 1)) {
        fail(ErrorCode::InvalidArgument, "discriminative_score: train_frac must lie in (0, 1)");
    }
    // Balance the classes by subsampling the larger side.
    const std::size_t n = std::min(real.size(), synth.size());
    Matrix rows;
    std::vector<double> labels;
    const std::vector<MicroTrip>* sides[2] = {&real, &synth};
    for (std::size_t label = 0; label < 2; ++label) {
        const auto& set = *sides[label];
        std::vector<std::size_t> idx(set.size());
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(forest.seed, {0x64697363, label});
        rng.shuffle(idx.begin(), idx.end());
        for (std::size_t k = 0; k < n; ++k) {
            rows.push_back(trip_summary(set[idx[k]]));
            labels.push_back(static_cast<double>(label));
        }
    }
    // Identical trips (in either class) form one group that never straddles
    // the split, so a copy in training cannot vote against its twin.
    std::map<std::vector<double>, std::size_t> group_of;
    std::vector<std::size_t> group(rows.size());
    std::vector<std::size_t> group_size;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto [it, fresh] = group_of.emplace(rows[i], group_size.size());
        if (fresh) {
            group_size.push_back(0);
        }
        group[i] = it->second;
        ++group_size[it->second];
    }
    std::vector<std::size_t> order(group_size.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(forest.seed, {0x64697363, 2});
    rng.shuffle(order.begin(), order.end());
    const auto target = static_cast<std::size_t>(std::round(train_frac * static_cast<double>(rows.size())));
    std::vector<bool> in_train(group_size.size(), false);
    std::size_t taken = 0;
    for (auto g : order) {
        if (taken >= target) {
            break;
        }
        in_train[g] = true;
        taken += group_size[g];
    }
    Matrix x_train;
    Matrix x_test;
    std::vector<double> y_train;
    std::vector<double> y_test;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (in_train[group[i]]) {
            x_train.push_back(std::move(rows[i]));
            y_train.push_back(labels[i]);
        } else {
            x_test.push_back(std::move(rows[i]));
            y_test.push_back(labels[i]);
        }
    }
    if (x_test.empty()) {
        fail(ErrorCode::InvalidArgument, "discriminative_score: empty held-out split");
    }
    BaggedForest model(TreeTask::Classification, forest);
    model.fit(x_train, y_train);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x_test.size(); ++i) {
        if (model.classify(x_test[i]) == static_cast<int>(y_test[i])) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(x_test.size());
}

namespace {

std::vector<double> tstr_features(const MicroTrip& trip, std::size_t prefix) {
    std::vector<double> row(prefix + 1, 0.0);
    const auto v = trip.speeds();
    for (std::size_t i = 0; i < prefix && i < v.size(); ++i) {
        row[i] = v[i];
    }
    row[prefix] = trip.stats().duration_s;
    return row;
}

} // namespace

TstrResult tstr_mae(const std::vector<MicroTrip>& synth_train,
                    const std::vector<MicroTrip>& real_test, const ForestConfig& forest,
                    std::size_t prefix) {
    if (synth_train.size() < 10 || real_test.empty()) {
        fail(ErrorCode::InvalidArgument, "tstr_mae: need at least 10 training trips and a test set");
    }
    Matrix x;
    std::vector<double> y;
    for (const auto& t : synth_train) {
        x.push_back(tstr_features(t, prefix));
        y.push_back(t.stats().avg_speed_mps * kMpsToKmh);
    }
    BaggedForest model(TreeTask::Regression, forest);
    model.fit(x, y);
    const double base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    TstrResult r;
    for (const auto& t : real_test) {
        const double truth = t.stats().avg_speed_mps * kMpsToKmh;
        r.mae_kmh += std::abs(model.predict(tstr_features(t, prefix)) - truth);
        r.baseline_mae_kmh += std::abs(base - truth);
    }
    r.mae_kmh /= static_cast<double>(real_test.size());
    r.baseline_mae_kmh /= static_cast<double>(real_test.size());
    return r;
}

nlohmann::json MetricsConfig::to_json() const {
    return {{"safd", safd.to_json()},
            {"sliced_directions", sliced_directions},
            {"mmd_bandwidth", mmd_bandwidth},
            {"boundary_threshold", boundary_threshold},
            {"forest_trees", forest_trees},
            {"forest_depth", forest_depth},
            {"forest_min_leaf", forest_min_leaf},
            {"train_frac", train_frac},
            {"tstr_prefix", tstr_prefix},
            {"seed", seed}};
}

MetricsConfig MetricsConfig::from_json(const nlohmann::json& j) {
    MetricsConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "safd") {
                c.safd = SafdGrid::from_json(value);
            } else if (key == "sliced_directions") {
                c.sliced_directions = value.get<std::size_t>();
            } else if (key == "mmd_bandwidth") {
                c.mmd_bandwidth = value.get<double>();
            } else if (key == "boundary_threshold") {
                c.boundary_threshold = value.get<double>();
            } else if (key == "forest_trees") {
                c.forest_trees = value.get<std::size_t>();
            } else if (key == "forest_depth") {
                c.forest_depth = value.get<std::size_t>();
            } else if (key == "forest_min_leaf") {
                c.forest_min_leaf = value.get<std::size_t>();
            } else if (key == "train_frac") {
                c.train_frac = value.get<double>();
            } else if (key == "tstr_prefix") {
                c.tstr_prefix = value.get<std::size_t>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else {
                fail(ErrorCode::Config, "metrics: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("metrics: ") + e.what());
    }
    c.validate();
    return c;
}

void MetricsConfig::validate() const {
    safd.validate();
    if (sliced_directions == 0 || forest_trees == 0 || tstr_prefix == 0) {
        fail(ErrorCode::Config, "metrics: counts must be positive");
    }
    if (!(mmd_bandwidth > 0) || boundary_threshold < 0) {
        fail(ErrorCode::Config, "metrics: bandwidth must be > 0 and threshold >= 0");
    }
    if (!(train_frac > 0 && train_frac < 1)) {
        fail(ErrorCode::Config, "metrics: train_frac must lie in (0, 1)");
    }
}

nlohmann::json MetricsReport::to_json() const {
    return {{"distributional_fidelity",
             {{"wd_speed", wd_speed},
              {"wd_accel", wd_accel},
              {"wd_vsp", wd_vsp},
              {"wd_safd_2d", wd_safd_2d},
              {"mmd", mmd},
              {"ks_vsp", ks_vsp}}},
            {"kinematic_validity",
             {{"boundary_violation_pct", boundary_violation_pct},
              {"ldlj_mean", ldlj_mean},
              {"max_speed", max_speed},
              {"accel_std", accel_std},
              {"real_ldlj_mean", real_ldlj_mean},
              {"real_max_speed", real_max_speed},
              {"real_accel_std", real_accel_std}}},
            {"utility",
             {{"discriminative_score", discriminative_score},
              {"tstr_mae_kmh", tstr_mae_kmh},
              {"tstr_baseline_mae_kmh", tstr_baseline_mae_kmh}}},
            {"samples", {{"n_real", n_real}, {"n_synth", n_synth}, {"ldlj_skipped", ldlj_skipped}}},
            {"config", config.to_json()}};
}

void MetricsReport::write_csv(std::ostream& out) const {
    const std::pair<const char*, double> rows[] = {
        {"wd_speed", wd_speed},
        {"wd_accel", wd_accel},
        {"wd_vsp", wd_vsp},
        {"wd_safd_2d", wd_safd_2d},
        {"mmd", mmd},
        {"ks_vsp", ks_vsp},
        {"boundary_violation_pct", boundary_violation_pct},
        {"ldlj_mean", ldlj_mean},
        {"max_speed", max_speed},
        {"accel_std", accel_std},
        {"real_ldlj_mean", real_ldlj_mean},
        {"real_max_speed", real_max_speed},
        {"real_accel_std", real_accel_std},
        {"discriminative_score", discriminative_score},
        {"tstr_mae_kmh", tstr_mae_kmh},
        {"tstr_baseline_mae_kmh", tstr_baseline_mae_kmh},
        {"n_real", static_cast<double>(n_real)},
        {"n_synth", static_cast<double>(n_synth)},
    };
    out << "metric,value\n";
    for (const auto& [name, value] : rows) {
        out << name << ',' << nlohmann::json(value).dump() << '\n';
    }
}

MetricsReport full_report(const std::vector<MicroTrip>& real, const std::vector<MicroTrip>& synth,
                          const MetricsConfig& cfg) {
    cfg.validate();
    if (real.size() < 20 || synth.size() < 20) {
        fail(ErrorCode::InvalidArgument, "full_report: need at least 20 trips per side");
    }
    MetricsReport r;
    r.config = cfg;
    r.n_real = real.size();
    r.n_synth = synth.size();

    const auto rv = pooled(real, false);
    const auto sv = pooled(synth, false);
    const auto ra = pooled(real, true);
    const auto sa = pooled(synth, true);
    const auto rp = pooled_vsp(real);
    const auto sp = pooled_vsp(synth);
    r.wd_speed = wasserstein_1d(rv, sv);
    r.wd_accel = wasserstein_1d(ra, sa);
    r.wd_vsp = wasserstein_1d(rp, sp);
    r.ks_vsp = ks_statistic(rp, sp);
    r.wd_safd_2d = wasserstein_2d_safd(safd_histogram(real, cfg.safd), safd_histogram(synth, cfg.safd),
                                       cfg.sliced_directions, cfg.seed);
    auto mr = summary_matrix(real);
    auto ms = summary_matrix(synth);
    zscore_pooled(mr, ms);
    r.mmd = mmd_rbf(mr, ms, cfg.mmd_bandwidth);

    r.boundary_violation_pct = boundary_violation_rate(synth, cfg.boundary_threshold);
    const auto ls = ldlj_mean(synth);
    const auto lr = ldlj_mean(real);
    r.ldlj_mean = ls.mean;
    r.ldlj_skipped = ls.skipped;
    r.real_ldlj_mean = lr.mean;
    r.max_speed = dataset_max_speed(synth);
    r.real_max_speed = dataset_max_speed(real);
    r.accel_std = population_std(sa);
    r.real_accel_std = population_std(ra);

    const auto forest = cfg.forest();
    r.discriminative_score = discriminative_score(real, synth, forest, cfg.train_frac);
    const auto t = tstr_mae(synth, real, forest, cfg.tstr_prefix);
    r.tstr_mae_kmh = t.mae_kmh;
    r.tstr_baseline_mae_kmh = t.baseline_mae_kmh;
    return r;
}

} // namespace microtrip
