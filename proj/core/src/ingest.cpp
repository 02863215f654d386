#include "microtrip/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "microtrip/digest.hpp"
#include "microtrip/error.hpp"

namespace microtrip {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) {
        return false;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

std::string line_error(std::size_t line_no, const std::string& what) {
    return "line " + std::to_string(line_no) + ": " + what;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n % 2 == 1) {
        return xs[n / 2];
    }
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

SummaryRow summarize(std::string name, const std::vector<double>& xs) {
    SummaryRow row;
    row.attribute = std::move(name);
    row.min = *std::min_element(xs.begin(), xs.end());
    row.max = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    row.mean = sum / static_cast<double>(xs.size());
    row.median = median_of(xs);
    return row;
}

SummaryRow scaled(const SummaryRow& r, std::string name, double k) {
    return {std::move(name), r.min * k, r.max * k, r.mean * k, r.median * k};
}

constexpr const char* kBodyHeader = "trip_index,t,speed_mps";

} // namespace

std::vector<RawTrace> parse_trace_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") {
            view.remove_prefix(3);
        }
        view = trim(view);
        if (view.empty()) {
            continue;
        }
        const auto cols = split_commas(view);
        if (cols.size() != 3 || cols[0] != "trip_id" || cols[1] != "t" || cols[2] != "speed_mps") {
            fail(ErrorCode::Parse, line_error(line_no, "expected header 'trip_id,t,speed_mps'"));
        }
        have_header = true;
        break;
    }
    if (!have_header) {
        fail(ErrorCode::Parse, "missing header 'trip_id,t,speed_mps'");
    }

    std::vector<RawTrace> traces;
    std::unordered_map<std::string, std::size_t> index;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty()) {
            continue;
        }
        const auto cols = split_commas(view);
        if (cols.size() != 3) {
            fail(ErrorCode::Parse, line_error(line_no, "expected 3 fields, got " +
                                                           std::to_string(cols.size())));
        }
        if (cols[0].empty()) {
            fail(ErrorCode::Parse, line_error(line_no, "empty trip_id"));
        }
        double t = 0.0;
        double v = 0.0;
        if (!parse_double(cols[1], t)) {
            fail(ErrorCode::Parse, line_error(line_no, "non-numeric t '" + std::string(cols[1]) + "'"));
        }
        if (!parse_double(cols[2], v)) {
            fail(ErrorCode::Parse,
                 line_error(line_no, "non-numeric speed_mps '" + std::string(cols[2]) + "'"));
        }
        const std::string id(cols[0]);
        auto it = index.find(id);
        if (it == index.end()) {
            it = index.emplace(id, traces.size()).first;
            traces.push_back(RawTrace{id, {}, {}});
        }
        auto& trace = traces[it->second];
        if (!trace.timestamps.empty() && t <= trace.timestamps.back()) {
            fail(ErrorCode::Parse,
                 line_error(line_no, t == trace.timestamps.back()
                                         ? "duplicate timestamp in trip '" + id + "'"
                                         : "non-monotone timestamp in trip '" + id + "'"));
        }
        trace.timestamps.push_back(t);
        trace.speeds.push_back(std::max(0.0, v));
    }
    return traces;
}

SpeedTrajectory resample_1hz(const RawTrace& raw) {
    const auto& ts = raw.timestamps;
    const auto& vs = raw.speeds;
    if (ts.size() < 2 || ts.size() != vs.size()) {
        fail(ErrorCode::DegenerateInput, "trace '" + raw.trip_id + "' needs at least 2 points");
    }
    if (ts.back() - ts.front() < 2.0) {
        fail(ErrorCode::DegenerateInput, "trace '" + raw.trip_id + "' spans less than 2 s");
    }
    const auto first = static_cast<long long>(std::ceil(ts.front()));
    const auto last = static_cast<long long>(std::floor(ts.back()));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(last - first + 1));
    std::size_t j = 0;
    for (long long g = first; g <= last; ++g) {
        const double gt = static_cast<double>(g);
        while (j + 2 < ts.size() && ts[j + 1] <= gt) {
            ++j;
        }
        double v;
        if (gt == ts[j]) {
            v = vs[j];
        } else if (gt == ts[j + 1]) {
            v = vs[j + 1];
        } else {
            const double w = (gt - ts[j]) / (ts[j + 1] - ts[j]);
            v = vs[j] + (vs[j + 1] - vs[j]) * w;
        }
        out.push_back(std::max(0.0, v));
    }
    return SpeedTrajectory(std::move(out));
}

std::vector<MicroTrip> segment_micro_trips(const SpeedTrajectory& traj, double stop_speed,
                                           double min_duration) {
    const auto v = traj.samples();
    const std::size_t n = v.size();
    std::vector<MicroTrip> out;
    std::size_t i = 0;
    while (i < n) {
        if (v[i] <= stop_speed) {
            ++i;
            continue;
        }
        const std::size_t a = i;
        while (i < n && v[i] > stop_speed) {
            ++i;
        }
        const std::size_t b = i;  // one past the run
        if (a == 0 || b == n) {
            continue;
        }
        const double duration = static_cast<double>(b - a + 1);
        if (duration < min_duration) {
            continue;
        }
        std::vector<double> seg(v.begin() + static_cast<std::ptrdiff_t>(a - 1),
                                v.begin() + static_cast<std::ptrdiff_t>(b + 1));
        seg.front() = 0.0;
        seg.back() = 0.0;
        out.emplace_back(std::move(seg));
    }
    return out;
}

std::vector<SummaryRow> dataset_summary(const std::vector<MicroTrip>& trips) {
    if (trips.empty()) {
        fail(ErrorCode::DegenerateInput, "dataset summary of an empty dataset");
    }
    std::vector<double> dur;
    std::vector<double> dist;
    std::vector<double> avg;
    for (const auto& trip : trips) {
        dur.push_back(trip.stats().duration_s);
        dist.push_back(trip.stats().distance_m);
        avg.push_back(trip.stats().avg_speed_mps);
    }
    const auto d = summarize("Duration (s)", dur);
    const auto m = summarize("Distance (m)", dist);
    const auto s = summarize("Avg Speed (m/s)", avg);
    return {d, scaled(d, "Duration (min)", 1.0 / 60.0), m, scaled(m, "Distance (km)", 1e-3),
            s, scaled(s, "Avg Speed (km/h)", 3.6)};
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    // Reproducible-builds convention: a fixed clock for byte-identical reruns.
    if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) {
        long long secs = 0;
        const auto* end = fixed + std::strlen(fixed);
        const auto [ptr, ec] = std::from_chars(fixed, end, secs);
        if (ec == std::errc() && ptr == end && secs >= 0) {
            now = static_cast<std::time_t>(secs);
        }
    }
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string serialize_dataset(const Dataset& ds) {
    std::string body = kBodyHeader;
    body += '\n';
    for (std::size_t k = 0; k < ds.micro_trips.size(); ++k) {
        const auto v = ds.micro_trips[k].speeds();
        const std::string prefix = std::to_string(k) + ",";
        for (std::size_t t = 0; t < v.size(); ++t) {
            body += prefix;
            body += std::to_string(t);
            body += ',';
            body += format_double(v[t]);
            body += '\n';
        }
    }
    nlohmann::json prov = nlohmann::json::array();
    for (const auto& p : ds.sources) {
        prov.push_back({{"source", p.source}, {"sha256", p.sha256}});
    }
    nlohmann::json header = {
        {"format", "microtrip-dataset"},
        {"version", kDatasetFormatVersion},
        {"created_at", ds.created_at},
        {"sources", prov},
        {"config_digest", ds.config_digest},
        {"n_trips", ds.micro_trips.size()},
        {"body_sha256", sha256_hex(body)},
    };
    return header.dump() + "\n" + body;
}

Dataset deserialize_dataset(const std::string& text) {
    const auto nl = text.find('\n');
    if (nl == std::string::npos) {
        fail(ErrorCode::Checksum, "dataset file truncated inside the header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, std::string("dataset header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || header.value("format", "") != "microtrip-dataset") {
        fail(ErrorCode::Parse, "not a microtrip dataset file");
    }
    if (!header.contains("version") || !header["version"].is_number_integer()) {
        fail(ErrorCode::Version, "dataset header has no integer version");
    }
    const int version = header["version"].get<int>();
    if (version != kDatasetFormatVersion) {
        fail(ErrorCode::Version, "unsupported dataset version " + std::to_string(version) +
                                     " (reader supports " +
                                     std::to_string(kDatasetFormatVersion) + ")");
    }
    const std::string body = text.substr(nl + 1);
    if (sha256_hex(body) != header.value("body_sha256", "")) {
        fail(ErrorCode::Checksum, "dataset body checksum mismatch (file truncated or modified)");
    }

    Dataset ds;
    ds.created_at = header.value("created_at", "");
    ds.config_digest = header.value("config_digest", "");
    for (const auto& p : header.value("sources", nlohmann::json::array())) {
        ds.sources.push_back({p.value("source", ""), p.value("sha256", "")});
    }

    std::istringstream in(body);
    std::string line;
    std::getline(in, line);
    if (trim(line) != kBodyHeader) {
        fail(ErrorCode::Parse, "dataset body header missing");
    }
    std::vector<std::vector<double>> trips;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cols = split_commas(line);
        double k = 0.0;
        double t = 0.0;
        double v = 0.0;
        if (cols.size() != 3 || !parse_double(cols[0], k) || !parse_double(cols[1], t) ||
            !parse_double(cols[2], v)) {
            fail(ErrorCode::Parse, line_error(line_no, "malformed dataset row"));
        }
        const auto ki = static_cast<std::size_t>(k);
        if (ki == trips.size()) {
            trips.emplace_back();
        } else if (ki + 1 != trips.size()) {
            fail(ErrorCode::Parse, line_error(line_no, "trip_index out of order"));
        }
        if (static_cast<std::size_t>(t) != trips.back().size()) {
            fail(ErrorCode::Parse, line_error(line_no, "t out of sequence"));
        }
        trips.back().push_back(v);
    }
    if (header.contains("n_trips") && header["n_trips"].get<std::size_t>() != trips.size()) {
        fail(ErrorCode::Checksum, "dataset trip count does not match header");
    }
    ds.micro_trips.reserve(trips.size());
    for (auto& v : trips) {
        ds.micro_trips.emplace_back(std::move(v));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::InvalidArgument, "cannot write dataset to " + path.string());
    }
    out << serialize_dataset(ds);
    if (!out) {
        fail(ErrorCode::InvalidArgument, "failed writing dataset to " + path.string());
    }
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::NotFound, "dataset not found: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_dataset(ss.str());
}

} // namespace microtrip
