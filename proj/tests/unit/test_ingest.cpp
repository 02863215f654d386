#include <gtest/gtest.h>

#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "microtrip/error.hpp"
#include "microtrip/fixture.hpp"
#include "microtrip/ingest.hpp"
#include "microtrip/rng.hpp"
#include "oracles.hpp"

using namespace microtrip;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::Config;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("microtrip_test_" + name);
}

} // namespace

TEST(ParseTraceCsv, SingleTrip) {
    std::istringstream in("trip_id,t,speed_mps\na,0,0\na,1,2.5\na,2,0\n");
    const auto traces = parse_trace_csv(in);
    ASSERT_EQ(traces.size(), 1u);
    EXPECT_EQ(traces[0].trip_id, "a");
    EXPECT_EQ(traces[0].speeds, (std::vector<double>{0, 2.5, 0}));
}

TEST(ParseTraceCsv, HeaderOnlyIsEmpty) {
    std::istringstream in("trip_id,t,speed_mps\n");
    EXPECT_TRUE(parse_trace_csv(in).empty());
}

TEST(ParseTraceCsv, DuplicateTimestampNamesLine) {
    std::istringstream in("trip_id,t,speed_mps\na,0,0\na,1,1\na,1,2\n");
    try {
        parse_trace_csv(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Parse);
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(ParseTraceCsv, Rejections) {
    EXPECT_EQ(code_of([] {
                  std::istringstream in("");
                  parse_trace_csv(in);
              }),
              ErrorCode::Parse);
    EXPECT_EQ(code_of([] {
                  std::istringstream in("id,time,v\n");
                  parse_trace_csv(in);
              }),
              ErrorCode::Parse);
    EXPECT_EQ(code_of([] {
                  std::istringstream in("trip_id,t,speed_mps\na,0,fast\n");
                  parse_trace_csv(in);
              }),
              ErrorCode::Parse);
    EXPECT_EQ(code_of([] {
                  std::istringstream in("trip_id,t,speed_mps\na,3,0\na,2,0\n");
                  parse_trace_csv(in);
              }),
              ErrorCode::Parse);
}

TEST(ParseTraceCsv, InterleavedTripsAndNegativeClip) {
    std::istringstream in("trip_id,t,speed_mps\r\nb,0,1\r\na,0,-0.3\r\nb,1,2\r\n");
    const auto traces = parse_trace_csv(in);
    ASSERT_EQ(traces.size(), 2u);
    EXPECT_EQ(traces[0].trip_id, "b");
    EXPECT_EQ(traces[0].speeds, (std::vector<double>{1, 2}));
    EXPECT_EQ(traces[1].speeds, (std::vector<double>{0.0}));
}

TEST(Resample1Hz, LinearInterpolation) {
    const RawTrace raw{"x", {0.0, 2.0}, {0.0, 4.0}};
    const auto v = resample_1hz(raw);
    EXPECT_EQ(std::vector<double>(v.samples().begin(), v.samples().end()),
              (std::vector<double>{0, 2, 4}));
}

TEST(Resample1Hz, OnGridIsIdentity) {
    const RawTrace raw{"x", {3, 4, 5, 6}, {0, 1.25, 7.5, 0}};
    const auto v = resample_1hz(raw);
    EXPECT_EQ(std::vector<double>(v.samples().begin(), v.samples().end()), raw.speeds);
}

TEST(Resample1Hz, IrregularTraceMatchesPointwiseOracle) {
    Rng rng(21);
    RawTrace raw{"irr", {}, {}};
    double t = 0.37;
    for (int i = 0; i < 60; ++i) {
        raw.timestamps.push_back(t);
        raw.speeds.push_back(rng.uniform(0.0, 25.0));
        t += rng.uniform(3.0, 7.0);  // roughly 0.2 Hz
    }
    const auto v = resample_1hz(raw);
    const double first = std::ceil(raw.timestamps.front());
    ASSERT_EQ(v.size(), static_cast<std::size_t>(std::floor(raw.timestamps.back()) - first) + 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double expected =
            oracle::interpolate_at(raw.timestamps, raw.speeds, first + static_cast<double>(i));
        EXPECT_NEAR(v[i], expected, 1e-12) << "i=" << i;
    }
}

TEST(Resample1Hz, ShortSpanFails) {
    EXPECT_EQ(code_of([] { resample_1hz(RawTrace{"s", {0.0, 1.5}, {1, 1}}); }),
              ErrorCode::DegenerateInput);
    EXPECT_EQ(code_of([] { resample_1hz(RawTrace{"s", {0.0}, {1}}); }),
              ErrorCode::DegenerateInput);
}

TEST(SegmentMicroTrips, HandSegmentation) {
    const SpeedTrajectory v({0, 5, 5, 0, 0, 7, 0});
    const auto trips = segment_micro_trips(v, 0.0, 0.0);
    ASSERT_EQ(trips.size(), 2u);
    EXPECT_EQ(std::vector<double>(trips[0].speeds().begin(), trips[0].speeds().end()),
              (std::vector<double>{0, 5, 5, 0}));
    EXPECT_EQ(std::vector<double>(trips[1].speeds().begin(), trips[1].speeds().end()),
              (std::vector<double>{0, 7, 0}));
}

TEST(SegmentMicroTrips, AllZeroGivesNothing) {
    const SpeedTrajectory v(std::vector<double>(50, 0.0));
    EXPECT_TRUE(segment_micro_trips(v).empty());
}

TEST(SegmentMicroTrips, MinDurationDropsShortSegment) {
    std::vector<double> s = {0};
    for (int i = 0; i < 9; ++i) {
        s.push_back(4.0);
    }
    s.push_back(0);  // 10 s segment
    for (int i = 0; i < 40; ++i) {
        s.push_back(6.0);
    }
    s.push_back(0);  // 41 s segment
    const auto trips = segment_micro_trips(SpeedTrajectory(s), 0.5, 34.0);
    ASSERT_EQ(trips.size(), 1u);
    EXPECT_DOUBLE_EQ(trips[0].stats().duration_s, 41.0);
}

TEST(SegmentMicroTrips, RestEndpointsForcedToZero) {
    const SpeedTrajectory v({0.3, 0.4, 3, 4, 0.2, 0.1});
    const auto trips = segment_micro_trips(v, 0.5, 0.0);
    ASSERT_EQ(trips.size(), 1u);
    EXPECT_EQ(std::vector<double>(trips[0].speeds().begin(), trips[0].speeds().end()),
              (std::vector<double>{0, 3, 4, 0}));
}

TEST(SegmentMicroTrips, PartitionPropertyOnRandomTraces) {
    Rng rng(8);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> s(400);
        double x = 0.0;
        for (auto& v : s) {
            x = std::max(0.0, x + rng.normal(0.0, 1.5));
            if (rng.uniform() < 0.02) {
                x = 0.0;
            }
            v = x;
        }
        const auto trips = segment_micro_trips(SpeedTrajectory(s), 0.5, 0.0);
        // Every interior sample of every segment appears in the source in
        // order, and segments do not overlap beyond a shared rest sample.
        std::size_t cursor = 0;
        for (const auto& trip : trips) {
            const auto sp = trip.speeds();
            EXPECT_EQ(sp.front(), 0.0);
            EXPECT_EQ(sp.back(), 0.0);
            std::size_t pos = cursor;
            while (pos < s.size() && !(s[pos] > 0.5 && s[pos] == sp[1])) {
                ++pos;
            }
            ASSERT_LT(pos, s.size());
            for (std::size_t k = 1; k + 1 < sp.size(); ++k) {
                ASSERT_EQ(s[pos + k - 1], sp[k]);
            }
            cursor = pos + sp.size() - 2;
        }
    }
}

TEST(DatasetSummary, SingleTrip) {
    const std::vector<MicroTrip> trips = {MicroTrip({0, 10, 10, 10, 0})};
    const auto rows = dataset_summary(trips);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows[0].attribute, "Duration (s)");
    EXPECT_EQ(rows[0].min, 4.0);
    EXPECT_EQ(rows[0].max, 4.0);
    EXPECT_EQ(rows[0].mean, 4.0);
    EXPECT_EQ(rows[0].median, 4.0);
}

TEST(DatasetSummary, TwoTripMedianIsMidpoint) {
    const std::vector<MicroTrip> trips = {MicroTrip({0, 10, 10, 10, 0}), MicroTrip({0, 2, 0})};
    const auto rows = dataset_summary(trips);
    EXPECT_DOUBLE_EQ(rows[0].median, 3.0);
    EXPECT_DOUBLE_EQ(rows[2].median, 16.0);
    EXPECT_DOUBLE_EQ(rows[3].median, 0.016);
    EXPECT_DOUBLE_EQ(rows[5].median, 0.5 * (7.5 + 1.0) * 3.6);
}

TEST(DatasetSummary, EmptyFails) {
    EXPECT_EQ(code_of([] { dataset_summary({}); }), ErrorCode::DegenerateInput);
}

TEST(DatasetSummary, FixtureMeanDurationMatchesAnalyticValue) {
    FixtureConfig cfg;
    cfg.n_trips = 3000;
    cfg.max_duration = 2000.0;
    const auto fx = generate_fixture(cfg);
    const auto rows = dataset_summary(fx.trips);
    // Standard error of the truncated-lognormal mean at n=3000 is about 4 s.
    EXPECT_NEAR(rows[0].mean, fx.analytic_mean_duration, 16.0);
    EXPECT_GE(rows[0].min, 34.0);
    EXPECT_LE(rows[0].max, 2000.0);
    for (const auto& trip : fx.trips) {
        EXPECT_GE(trip.stats().avg_speed_mps, 5.18);
        EXPECT_LE(trip.stats().avg_speed_mps, 31.57);
    }
}

TEST(Fixture, TracesSegmentBackIntoTrips) {
    FixtureConfig cfg;
    cfg.n_trips = 40;
    cfg.max_duration = 800.0;
    const auto fx = generate_fixture(cfg);
    std::ostringstream csv;
    write_trace_csv(fx.traces, csv);
    std::istringstream in(csv.str());
    std::vector<MicroTrip> recovered;
    for (const auto& raw : parse_trace_csv(in)) {
        for (auto& trip : segment_micro_trips(resample_1hz(raw))) {
            recovered.push_back(std::move(trip));
        }
    }
    ASSERT_EQ(recovered.size(), fx.trips.size());
    for (std::size_t i = 0; i < recovered.size(); ++i) {
        ASSERT_TRUE(std::equal(recovered[i].speeds().begin(), recovered[i].speeds().end(),
                               fx.trips[i].speeds().begin(), fx.trips[i].speeds().end()))
            << "trip " << i;
    }
}

TEST(Fixture, AnalyticMeanAgainstNumericalIntegration) {
    // Trapezoid integration of x * pdf(x) over the truncation interval.
    const double mu = std::log(187.0);
    const double sigma = 0.986;
    const double lo = 34.0;
    const double hi = 12841.0;
    const int n = 400000;
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double z = (std::log(x) - mu) / sigma;
        const double pdf = std::exp(-0.5 * z * z) / (x * sigma * std::sqrt(2.0 * M_PI));
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        num += w * x * pdf;
        den += w * pdf;
    }
    EXPECT_NEAR(truncated_lognormal_mean(mu, sigma, lo, hi), num / den, 1e-3);
}

TEST(DatasetIo, RoundTripIsBitExact) {
    FixtureConfig cfg;
    cfg.n_trips = 25;
    cfg.max_duration = 600.0;
    Dataset ds;
    ds.micro_trips = generate_fixture(cfg).trips;
    ds.sources = {{"fixture.csv", std::string(64, 'a')}};
    ds.created_at = "2026-01-01T00:00:00Z";
    ds.config_digest = "abc";
    const auto path = temp_path("roundtrip.mtd");
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    ASSERT_EQ(back.micro_trips.size(), ds.micro_trips.size());
    for (std::size_t i = 0; i < ds.micro_trips.size(); ++i) {
        const auto a = ds.micro_trips[i].speeds();
        const auto b = back.micro_trips[i].speeds();
        ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    EXPECT_EQ(back.sources.size(), 1u);
    EXPECT_EQ(back.created_at, ds.created_at);
    EXPECT_EQ(back.config_digest, "abc");
    EXPECT_EQ(serialize_dataset(back), serialize_dataset(ds));
    std::filesystem::remove(path);
}

TEST(DatasetIo, TruncatedFileIsChecksumError) {
    Dataset ds;
    ds.micro_trips = {MicroTrip({0, 1.5, 3.25, 0}), MicroTrip({0, 9, 0})};
    const auto text = serialize_dataset(ds);
    const auto truncated = text.substr(0, text.size() - 7);
    EXPECT_EQ(code_of([&] { deserialize_dataset(truncated); }), ErrorCode::Checksum);
    EXPECT_EQ(code_of([&] { deserialize_dataset(text.substr(0, 20)); }), ErrorCode::Checksum);
}

TEST(DatasetIo, UnknownVersionIsExplicit) {
    Dataset ds;
    ds.micro_trips = {MicroTrip({0, 1, 0})};
    auto text = serialize_dataset(ds);
    EXPECT_NO_THROW(deserialize_dataset(text));
    const auto pos = text.find("\"version\":1");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 11, "\"version\":7");
    EXPECT_EQ(code_of([&] { deserialize_dataset(text); }), ErrorCode::Version);
}

TEST(DatasetIo, MissingFileIsNotFound) {
    EXPECT_EQ(code_of([] { load_dataset(temp_path("does_not_exist.mtd")); }), ErrorCode::NotFound);
}

TEST(Timestamp, SourceDateEpochFixesTheClock) {
    ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
    EXPECT_EQ(utc_timestamp(), "1970-01-02T00:00:00Z");
    ::setenv("SOURCE_DATE_EPOCH", "not-a-number", 1);
    EXPECT_NE(utc_timestamp(), "1970-01-02T00:00:00Z");
    ::unsetenv("SOURCE_DATE_EPOCH");
    EXPECT_EQ(utc_timestamp().size(), 20u);
}
