#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "microtrip/analysis.hpp"
#include "microtrip/checkpoint.hpp"
#include "microtrip/digest.hpp"
#include "microtrip/fixture.hpp"
#include "microtrip/ingest.hpp"
#include "microtrip/markov.hpp"
#include "microtrip/metrics.hpp"
#include "microtrip/parallel.hpp"
#include "microtrip/postgen.hpp"
#include "microtrip/train.hpp"
#include "run_config.hpp"
#include "svg.hpp"

namespace microtrip::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::CheckpointNotFound:
    case ErrorCode::Parse:
    case ErrorCode::Checksum:
    case ErrorCode::Version:
        return kExitMissingArtifact;
    case ErrorCode::DegenerateInput:
    case ErrorCode::Infeasible:
    case ErrorCode::Numerical:
        return kExitNumerical;
    case ErrorCode::InvalidArgument:
    case ErrorCode::DigestMismatch:
    case ErrorCode::Config:
        return kExitUsage;
    }
    return kExitUsage;
}

namespace {

constexpr std::uint64_t kConditionStream = 0x636f6e64;

// Options shared by every pipeline command.
struct Common {
    std::string config_path;
};

struct ArtifactRef {
    std::string path;
    std::string sha256;
};

ArtifactRef input_ref(const fs::path& p) {
    return {p.string(), sha256_file(p)};
}

std::string read_text(const fs::path& p, ErrorCode missing = ErrorCode::NotFound) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        fail(missing, "cannot open " + p.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::InvalidArgument, "cannot write " + p.string());
    }
    out << text;
    if (!out) {
        fail(ErrorCode::InvalidArgument, "write failed for " + p.string());
    }
}

nlohmann::json read_json(const fs::path& p) {
    const auto text = read_text(p);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, p.string() + " is not valid JSON: " + e.what());
    }
}

// Writes <primary>.manifest.json next to the first output.
class Manifest {
public:
    Manifest(std::string command, const RunConfig& cfg)
        : command_(std::move(command)), config_(cfg.to_json()), digest_(cfg.digest()),
          start_(std::chrono::steady_clock::now()) {}

    void input(const fs::path& p) { inputs_.push_back(input_ref(p)); }
    void output(const fs::path& p) { outputs_.push_back(p); }
    void seed(std::uint64_t s) { seed_ = s; }

    void write() const {
        if (outputs_.empty()) {
            return;
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        nlohmann::json ins = nlohmann::json::array();
        for (const auto& r : inputs_) {
            ins.push_back({{"path", r.path}, {"sha256", r.sha256}});
        }
        nlohmann::json outs = nlohmann::json::array();
        for (const auto& p : outputs_) {
            outs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
        }
        nlohmann::json m = {
            {"command", command_},
            {"config_digest", digest_},
            {"config", config_},
            {"inputs", ins},
            {"outputs", outs},
            {"seed", seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr)},
            {"threads", worker_count()},
            {"finished_at", utc_timestamp()},
            {"wall_time_s", wall},
        };
        write_text(outputs_.front().string() + ".manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    nlohmann::json config_;
    std::string digest_;
    std::chrono::steady_clock::time_point start_;
    std::vector<ArtifactRef> inputs_;
    std::vector<fs::path> outputs_;
    std::optional<std::uint64_t> seed_;
};

RunConfig base_config(const Common& c) {
    return c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
}

template <typename T>
void apply(const std::optional<T>& flag, T& target) {
    if (flag) {
        target = *flag;
    }
}

Dataset load_input_dataset(const fs::path& p) {
    if (!fs::exists(p)) {
        fail(ErrorCode::NotFound, "dataset not found: " + p.string());
    }
    return load_dataset(p);
}

std::string csv_num(double v) {
    return nlohmann::json(v).dump();
}

void add_config_option(CLI::App* sub, Common& common) {
    sub->add_option("--config", common.config_path, "JSON run config (unknown keys rejected)");
}

// ---------------------------------------------------------------- fixture

struct FixtureArgs {
    std::size_t n = 200;
    std::uint64_t seed = 7;
    double max_duration = 12841.0;
    std::string out;
};

int cmd_fixture(const FixtureArgs& a, std::ostream& out) {
    FixtureConfig fc;
    fc.n_trips = a.n;
    fc.seed = a.seed;
    fc.max_duration = a.max_duration;
    const auto fx = generate_fixture(fc);
    std::ostringstream csv;
    write_trace_csv(fx.traces, csv);
    write_text(a.out, csv.str());
    RunConfig defaults;
    Manifest m("fixture", defaults);
    m.seed(a.seed);
    m.output(a.out);
    m.write();
    out << "fixture: " << fx.trips.size() << " trips in " << fx.traces.size() << " traces -> "
        << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    Common common;
    std::string input;
    std::string output;
    std::optional<double> stop_speed;
    std::optional<double> min_duration;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
    auto cfg = base_config(a.common);
    apply(a.stop_speed, cfg.ingest.stop_speed);
    apply(a.min_duration, cfg.ingest.min_duration);
    cfg.validate();
    Manifest m("ingest", cfg);

    std::ifstream in(a.input);
    if (!in) {
        fail(ErrorCode::NotFound, "input CSV not found: " + a.input);
    }
    const auto traces = parse_trace_csv(in);
    Dataset ds;
    for (const auto& raw : traces) {
        const auto traj = resample_1hz(raw);
        auto trips = segment_micro_trips(traj, cfg.ingest.stop_speed, cfg.ingest.min_duration);
        for (auto& t : trips) {
            ds.micro_trips.push_back(std::move(t));
        }
    }
    if (ds.micro_trips.empty()) {
        fail(ErrorCode::DegenerateInput, "no micro-trips survived segmentation of " + a.input);
    }
    ds.sources.push_back({fs::path(a.input).filename().string(), sha256_file(a.input)});
    ds.created_at = utc_timestamp();
    ds.config_digest = cfg.digest();
    save_dataset(ds, a.output);

    m.input(a.input);
    m.output(a.output);
    m.write();
    out << "ingest: " << traces.size() << " traces, " << ds.micro_trips.size()
        << " micro-trips -> " << a.output << "\n";
    for (const auto& row : dataset_summary(ds.micro_trips)) {
        out << "  " << row.attribute << ": min " << row.min << " max " << row.max << " mean "
            << row.mean << " median " << row.median << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- cluster

struct ClusterArgs {
    Common common;
    std::string dataset;
    std::string out;
    std::string projections;
    std::string summary;
    std::string train_out;
    std::string test_out;
    std::optional<std::size_t> k;
    std::optional<std::uint64_t> seed;
    std::optional<double> train_frac;
};

Dataset subset(const Dataset& src, const std::vector<std::size_t>& idx, const fs::path& src_path,
               const std::string& digest) {
    Dataset ds;
    for (auto i : idx) {
        ds.micro_trips.push_back(src.micro_trips[i]);
    }
    ds.sources.push_back({src_path.filename().string(), sha256_file(src_path)});
    ds.created_at = utc_timestamp();
    ds.config_digest = digest;
    return ds;
}

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
    auto cfg = base_config(a.common);
    apply(a.k, cfg.cluster.k);
    apply(a.seed, cfg.cluster.seed);
    apply(a.train_frac, cfg.cluster.train_frac);
    cfg.validate();
    Manifest m("cluster", cfg);
    m.seed(cfg.cluster.seed);

    const auto ds = load_input_dataset(a.dataset);
    m.input(a.dataset);
    std::vector<FeatureVector> feats;
    feats.reserve(ds.micro_trips.size());
    for (const auto& t : ds.micro_trips) {
        feats.push_back(extract_features(t));
    }
    const auto model = kmeans_fit(feats, cfg.cluster.k, cfg.cluster.seed);
    auto j = cluster_model_to_json(model);
    j["config_digest"] = cfg.digest();
    write_text(a.out, j.dump(2) + "\n");
    m.output(a.out);

    if (!a.projections.empty()) {
        const auto pca = pca_project(feature_matrix(feats), 2);
        for (const auto& w : pca.warnings) {
            out << "cluster: warning: " << w << "\n";
        }
        std::string csv = "trip,cluster,pc1,pc2\n";
        for (std::size_t i = 0; i < pca.projections.size(); ++i) {
            const auto& p = pca.projections[i];
            csv += std::to_string(i) + "," + std::to_string(model.assignments[i]) + "," +
                   csv_num(p.at(0)) + "," + csv_num(p.size() > 1 ? p[1] : 0.0) + "\n";
        }
        write_text(a.projections, csv);
        m.output(a.projections);
    }

    const auto rows = cluster_summary(feats, model.assignments, model.k);
    std::string table = "cluster,count,avg_speed_kmh,max_speed_kmh,stops_per_km,idle_ratio_pct\n";
    for (const auto& r : rows) {
        table += std::to_string(r.cluster) + "," + std::to_string(r.count) + "," +
                 csv_num(3.6 * r.avg_speed) + "," + csv_num(3.6 * r.max_speed) + "," +
                 csv_num(r.stops_per_km) + "," + csv_num(r.idle_ratio_pct) + "\n";
    }
    const std::string summary_path =
        a.summary.empty() ? fs::path(a.out).replace_extension(".summary.csv").string() : a.summary;
    write_text(summary_path, table);
    m.output(summary_path);

    const auto split = stratified_split(model.assignments, cfg.cluster.train_frac, cfg.cluster.seed);
    for (const auto& w : split.warnings) {
        out << "cluster: warning: " << w << "\n";
    }
    if (!a.train_out.empty()) {
        save_dataset(subset(ds, split.train, a.dataset, cfg.digest()), a.train_out);
        m.output(a.train_out);
    }
    if (!a.test_out.empty()) {
        save_dataset(subset(ds, split.test, a.dataset, cfg.digest()), a.test_out);
        m.output(a.test_out);
    }
    m.write();
    out << "cluster: k=" << model.k << " after " << model.iterations << " iterations; split "
        << split.train.size() << "/" << split.test.size() << "\n";
    out << table;
    return kExitOk;
}

// ---------------------------------------------------------------- fit-markov

struct FitMarkovArgs {
    Common common;
    std::string train;
    std::string out;
    std::optional<double> delta_v;
    std::optional<double> alpha;
};

nlohmann::json markov_file(const TransitionModel& model, const std::string& digest) {
    return {{"config_digest", digest}, {"model", model.to_json()}};
}

TransitionModel load_markov_file(const fs::path& p) {
    if (!fs::exists(p)) {
        fail(ErrorCode::NotFound, "Markov model not found: " + p.string());
    }
    const auto j = read_json(p);
    if (!j.is_object() || !j.contains("model")) {
        fail(ErrorCode::Parse, p.string() + " is not a Markov model file");
    }
    return TransitionModel::from_json(j["model"]);
}

int cmd_fit_markov(const FitMarkovArgs& a, std::ostream& out) {
    auto cfg = base_config(a.common);
    apply(a.delta_v, cfg.markov.delta_v);
    apply(a.alpha, cfg.markov.alpha);
    cfg.validate();
    Manifest m("fit-markov", cfg);
    const auto ds = load_input_dataset(a.train);
    m.input(a.train);
    const auto model = fit_second_order(ds.micro_trips, cfg.markov.delta_v, cfg.markov.alpha);
    write_text(a.out, markov_file(model, cfg.digest()).dump() + "\n");
    m.output(a.out);
    m.write();
    out << "fit-markov: " << model.bins() << " bins, " << model.observed_triples()
        << " observed triples -> " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    Common common;
    std::string train;
    std::string out;
    std::string loss_csv;
    std::optional<std::string> arch;
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    auto cfg = base_config(a.common);
    if (a.arch) {
        cfg.arch = arch_preset(*a.arch);
    }
    apply(a.epochs, cfg.train.epochs);
    apply(a.seed, cfg.train.seed);
    cfg.validate();
    Manifest m("train", cfg);
    m.seed(cfg.train.seed);

    const auto ds = load_input_dataset(a.train);
    m.input(a.train);
    std::vector<TrainingItem> items;
    items.reserve(ds.micro_trips.size());
    for (const auto& t : ds.micro_trips) {
        items.push_back(make_training_item(t, cfg.arch));
    }
    DenoiserNet net(cfg.arch, cfg.train.seed);
    const auto result = train(net, items, cfg.train, [&](const EpochRecord& r) {
        out << "train: epoch " << r.epoch << " loss " << r.mean.total << " mse " << r.mean.mse
            << "\n";
    });
    save_checkpoint({net.arch(), net.params(), cfg.train, cfg.digest()}, a.out);
    m.output(a.out);
    if (!a.loss_csv.empty()) {
        std::ostringstream csv;
        write_loss_csv(result.history, cfg.train.physics, csv);
        write_text(a.loss_csv, csv.str());
        m.output(a.loss_csv);
    }
    m.write();
    out << "train: " << items.size() << " trips, " << result.history.size() << " epochs -> "
        << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    Common common;
    std::string conditions;
    std::string out;
    std::string checkpoint;
    std::string model;
    std::string engine = "markov";
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
};

// Conditions from a dataset (the trips' own statistics) or a CSV with
// avg_speed_mps,duration_s[,max_speed_mps,d_veh].
std::vector<TripCondition> load_conditions(const fs::path& p) {
    const auto text = read_text(p);
    if (!text.empty() && text.front() == '{') {
        std::vector<TripCondition> pool;
        for (const auto& t : deserialize_dataset(text).micro_trips) {
            pool.push_back(condition_of(t));
        }
        return pool;
    }
    std::istringstream in(text);
    std::string line;
    std::vector<TripCondition> pool;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r" || (line_no == 1 && line.find("avg") != std::string::npos)) {
            continue;
        }
        std::vector<double> cols;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                cols.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                fail(ErrorCode::Parse, p.string() + ":" + std::to_string(line_no) +
                                           ": non-numeric condition '" + cell + "'");
            }
        }
        if (cols.size() != 2 && cols.size() != 4) {
            fail(ErrorCode::Parse, p.string() + ":" + std::to_string(line_no) +
                                       ": expected 2 or 4 columns");
        }
        TripCondition c{cols[0], cols[1], cols.size() == 4 ? cols[2] : cols[0],
                        cols.size() == 4 ? cols[3] : 0.5};
        pool.push_back(c);
    }
    if (pool.empty()) {
        fail(ErrorCode::DegenerateInput, "no conditions in " + p.string());
    }
    return pool;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    auto cfg = base_config(a.common);
    apply(a.n, cfg.generate.n);
    apply(a.seed, cfg.generate.seed);
    cfg.validate();
    Manifest m("generate", cfg);
    m.seed(cfg.generate.seed);
    const auto& g = cfg.generate;

    if (!fs::exists(a.conditions)) {
        fail(ErrorCode::NotFound, "conditions file not found: " + a.conditions);
    }
    const auto pool = load_conditions(a.conditions);
    m.input(a.conditions);
    std::vector<TripCondition> conds = pool;
    if (g.n > 0) {
        Rng rng(g.seed, {kConditionStream});
        conds = sample_conditions(pool, g.postprocess.boost_speed, g.postprocess.boost_duration,
                                  g.n, rng);
    }

    Dataset ds;
    fs::path model_path;
    if (a.engine == "markov") {
        if (a.model.empty()) {
            fail(ErrorCode::InvalidArgument, "generate --engine markov needs --model");
        }
        model_path = a.model;
        const auto model = load_markov_file(model_path);
        ds.micro_trips = generate_markov(model, conds, g.seed);
    } else {
        if (a.checkpoint.empty()) {
            fail(ErrorCode::InvalidArgument, "generate --engine " + a.engine + " needs --checkpoint");
        }
        model_path = a.checkpoint;
        const auto ck = load_checkpoint(model_path);
        const auto want = a.engine == "unet" ? Architecture::Unet : Architecture::Transformer;
        if (ck.arch.kind != want) {
            fail(ErrorCode::InvalidArgument,
                 "checkpoint architecture does not match engine " + a.engine);
        }
        const DenoiserNet net(ck.arch, ck.params);
        const auto sched = make_schedule(ck.train.schedule, ck.train.diffusion_steps);
        ds.micro_trips = generate_diffusion(net, sched, conds, g.postprocess, g.seed);
    }
    m.input(model_path);
    ds.sources.push_back({fs::path(a.conditions).filename().string(), sha256_file(a.conditions)});
    ds.sources.push_back({model_path.filename().string(), sha256_file(model_path)});
    ds.created_at = utc_timestamp();
    ds.config_digest = cfg.digest();
    save_dataset(ds, a.out);
    m.output(a.out);
    m.write();
    out << "generate: " << ds.micro_trips.size() << " trips with engine " << a.engine << " -> "
        << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    Common common;
    std::string real;
    std::string synth;
    std::string out;
    std::string csv;
    bool force = false;
};

void check_digests(const Dataset& real, const Dataset& synth, const Common& common,
                   const RunConfig& cfg, bool force, std::ostream& out) {
    std::string problem;
    if (real.config_digest != synth.config_digest) {
        problem = "real and synthetic datasets were produced under different configs (" +
                  real.config_digest.substr(0, 12) + " vs " + synth.config_digest.substr(0, 12) +
                  ")";
    } else if (!common.config_path.empty() && real.config_digest != cfg.digest()) {
        problem = "datasets were not produced under the given config";
    }
    if (problem.empty()) {
        return;
    }
    if (!force) {
        fail(ErrorCode::DigestMismatch, problem + "; pass --force to evaluate anyway");
    }
    out << "warning: " << problem << " (continuing because of --force)\n";
}

nlohmann::json report_json(const MetricsReport& r, const fs::path& real, const fs::path& synth,
                           const std::string& digest) {
    auto j = r.to_json();
    j["inputs"] = {{"real", {{"file", real.filename().string()}, {"sha256", sha256_file(real)}}},
                   {"synth", {{"file", synth.filename().string()}, {"sha256", sha256_file(synth)}}}};
    j["config_digest"] = digest;
    return j;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    auto cfg = base_config(a.common);
    Manifest m("evaluate", cfg);
    const auto real = load_input_dataset(a.real);
    const auto synth = load_input_dataset(a.synth);
    m.input(a.real);
    m.input(a.synth);
    check_digests(real, synth, a.common, cfg, a.force, out);
    const auto report = full_report(real.micro_trips, synth.micro_trips, cfg.metrics);
    const auto j = report_json(report, a.real, a.synth, cfg.digest());
    write_text(a.out, j.dump(2) + "\n");
    m.output(a.out);
    if (!a.csv.empty()) {
        std::ostringstream csv;
        report.write_csv(csv);
        write_text(a.csv, csv.str());
        m.output(a.csv);
    }
    m.write();
    out << "evaluate: " << report.n_real << " real vs " << report.n_synth << " synthetic trips\n"
        << "  wd_speed " << report.wd_speed << "  wd_safd_2d " << report.wd_safd_2d
        << "  boundary_violation_pct " << report.boundary_violation_pct
        << "  discriminative " << report.discriminative_score << "  tstr_mae_kmh "
        << report.tstr_mae_kmh << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    Common common;
    std::string real;
    std::string synth;
    std::string metrics;
    std::string out_dir;
    bool plots = false;
    bool force = false;
};

void flatten(const nlohmann::json& j, const std::string& prefix, std::string& csv) {
    for (const auto& [key, value] : j.items()) {
        const std::string name = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) {
            flatten(value, name, csv);
        } else {
            csv += name + "," + value.dump() + "\n";
        }
    }
}

std::vector<double> all_speeds(const std::vector<MicroTrip>& trips) {
    std::vector<double> v;
    for (const auto& t : trips) {
        const auto s = t.speeds();
        v.insert(v.end(), s.begin(), s.end());
    }
    return v;
}

std::vector<double> all_accels(const std::vector<MicroTrip>& trips) {
    std::vector<double> v;
    for (const auto& t : trips) {
        const auto a = derive_acceleration(t.speeds());
        v.insert(v.end(), a.begin(), a.end());
    }
    return v;
}

std::vector<double> all_vsp(const std::vector<MicroTrip>& trips) {
    std::vector<double> v;
    for (const auto& t : trips) {
        const auto p = trip_vsp(t.speeds());
        v.insert(v.end(), p.begin(), p.end());
    }
    return v;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
    auto cfg = base_config(a.common);
    Manifest m("report", cfg);
    const auto real = load_input_dataset(a.real);
    const auto synth = load_input_dataset(a.synth);
    m.input(a.real);
    m.input(a.synth);
    check_digests(real, synth, a.common, cfg, a.force, out);

    nlohmann::json metrics;
    if (!a.metrics.empty()) {
        metrics = read_json(a.metrics);
        m.input(a.metrics);
    } else {
        metrics = report_json(full_report(real.micro_trips, synth.micro_trips, cfg.metrics),
                              a.real, a.synth, cfg.digest());
    }
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    write_text(dir / "metrics.json", metrics.dump(2) + "\n");
    m.output(dir / "metrics.json");
    std::string csv = "metric,value\n";
    flatten(metrics, "", csv);
    write_text(dir / "metrics.csv", csv);
    m.output(dir / "metrics.csv");

    if (a.plots) {
        const auto& r = real.micro_trips;
        const auto& s = synth.micro_trips;
        const std::string real_color = "#1f77b4";
        const std::string synth_color = "#d62728";
        const std::vector<std::pair<std::string, std::string>> files = {
            {"speed_hist.svg",
             histogram_svg("Speed distribution", "speed (m/s)",
                           {{"real", real_color, all_speeds(r)},
                            {"synthetic", synth_color, all_speeds(s)}},
                           40, 0.0, 40.0)},
            {"accel_hist.svg",
             histogram_svg("Acceleration distribution", "acceleration (m/s2)",
                           {{"real", real_color, all_accels(r)},
                            {"synthetic", synth_color, all_accels(s)}},
                           40, -4.0, 4.0)},
            {"vsp_hist.svg",
             histogram_svg("VSP distribution", "VSP (kW/t)",
                           {{"real", real_color, all_vsp(r)}, {"synthetic", synth_color, all_vsp(s)}},
                           45, -30.0, 60.0)},
            {"safd_real.svg",
             safd_heatmap_svg("SAFD, real", safd_histogram(r, cfg.metrics.safd))},
            {"safd_synth.svg",
             safd_heatmap_svg("SAFD, synthetic", safd_histogram(s, cfg.metrics.safd))},
            {"trips_real.svg",
             trajectories_svg("Real trips",
                              std::vector<MicroTrip>(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(
                                                                                std::min<std::size_t>(6, r.size()))),
                              real_color)},
            {"trips_synth.svg",
             trajectories_svg("Synthetic trips",
                              std::vector<MicroTrip>(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(
                                                                                std::min<std::size_t>(6, s.size()))),
                              synth_color)},
        };
        for (const auto& [name, svg] : files) {
            write_text(dir / name, svg);
            m.output(dir / name);
        }
    }
    m.write();
    out << "report: wrote " << (a.plots ? "metrics and plots" : "metrics") << " to " << a.out_dir
        << "\n";
    return kExitOk;
}

std::string error_json(std::string_view code, int exit_code, const std::string& message,
                       const std::string& command) {
    return nlohmann::json{{"error", code},
                          {"exit_code", exit_code},
                          {"message", message},
                          {"command", command}}
        .dump();
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Vehicle-speed micro-trip synthesis and evaluation", "microtrip"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "microtrip 0.1.0");

    FixtureArgs fx;
    auto* s_fixture = app.add_subcommand("fixture", "Write a synthetic trace CSV");
    s_fixture->add_option("--n", fx.n, "Number of micro-trips")->check(CLI::PositiveNumber);
    s_fixture->add_option("--seed", fx.seed, "Fixture seed");
    s_fixture->add_option("--max-duration", fx.max_duration, "Longest trip duration (s)");
    s_fixture->add_option("--out", fx.out, "Trace CSV to write")->required();

    IngestArgs ig;
    auto* s_ingest = app.add_subcommand("ingest", "Segment a trace CSV into a micro-trip dataset");
    add_config_option(s_ingest, ig.common);
    s_ingest->add_option("--input", ig.input, "Trace CSV (trip_id,t,speed_mps)")->required();
    s_ingest->add_option("--output", ig.output, "Dataset to write")->required();
    s_ingest->add_option("--stop-speed", ig.stop_speed, "Rest threshold (m/s)");
    s_ingest->add_option("--min-duration", ig.min_duration, "Shortest kept trip (s)");

    ClusterArgs cl;
    auto* s_cluster = app.add_subcommand("cluster", "K-means on trip features plus stratified split");
    add_config_option(s_cluster, cl.common);
    s_cluster->add_option("--dataset", cl.dataset, "Input dataset")->required();
    s_cluster->add_option("--out", cl.out, "Cluster model JSON")->required();
    s_cluster->add_option("--k", cl.k, "Number of clusters");
    s_cluster->add_option("--seed", cl.seed, "Clustering and split seed");
    s_cluster->add_option("--train-frac", cl.train_frac, "Train share of the split");
    s_cluster->add_option("--projections", cl.projections, "PCA projection CSV");
    s_cluster->add_option("--summary", cl.summary, "Per-cluster summary CSV");
    s_cluster->add_option("--train-out", cl.train_out, "Train split dataset");
    s_cluster->add_option("--test-out", cl.test_out, "Test split dataset");

    FitMarkovArgs fm;
    auto* s_fit = app.add_subcommand("fit-markov", "Fit the second-order Markov baseline");
    add_config_option(s_fit, fm.common);
    s_fit->add_option("--train", fm.train, "Training dataset")->required();
    s_fit->add_option("--out", fm.out, "Model JSON")->required();
    s_fit->add_option("--delta-v", fm.delta_v, "Speed bin width (m/s)");
    s_fit->add_option("--alpha", fm.alpha, "Additive smoothing of observed rows");

    TrainArgs tr;
    auto* s_train = app.add_subcommand("train", "Train a diffusion denoiser");
    add_config_option(s_train, tr.common);
    s_train->add_option("--train", tr.train, "Training dataset")->required();
    s_train->add_option("--out", tr.out, "Checkpoint to write")->required();
    s_train->add_option("--loss-csv", tr.loss_csv, "Per-epoch loss CSV");
    s_train->add_option("--arch", tr.arch, "Architecture preset");
    s_train->add_option("--epochs", tr.epochs, "Epoch count");
    s_train->add_option("--seed", tr.seed, "Initialization and training seed");

    GenerateArgs gn;
    auto* s_gen = app.add_subcommand("generate", "Generate synthetic micro-trips");
    add_config_option(s_gen, gn.common);
    s_gen->add_option("--engine", gn.engine, "markov, unet or csdi (default markov)")
        ->check(CLI::IsMember({"markov", "unet", "csdi"}));
    s_gen->add_option("--conditions", gn.conditions, "Dataset or CSV of trip conditions")->required();
    s_gen->add_option("--out", gn.out, "Dataset to write")->required();
    s_gen->add_option("--model", gn.model, "Markov model JSON");
    s_gen->add_option("--checkpoint", gn.checkpoint, "Diffusion checkpoint");
    s_gen->add_option("--n", gn.n, "Trips to draw (0: one per condition)");
    s_gen->add_option("--seed", gn.seed, "Generation seed");

    EvaluateArgs ev;
    auto* s_eval = app.add_subcommand("evaluate", "Score synthetic trips against real ones");
    add_config_option(s_eval, ev.common);
    s_eval->add_option("--real", ev.real, "Real dataset")->required();
    s_eval->add_option("--synth", ev.synth, "Synthetic dataset")->required();
    s_eval->add_option("--out", ev.out, "Report JSON")->required();
    s_eval->add_option("--csv", ev.csv, "Report CSV");
    s_eval->add_flag("--force", ev.force, "Evaluate despite a config digest mismatch");

    ReportArgs rp;
    auto* s_report = app.add_subcommand("report", "Write metric tables and SVG plots");
    add_config_option(s_report, rp.common);
    s_report->add_option("--real", rp.real, "Real dataset")->required();
    s_report->add_option("--synth", rp.synth, "Synthetic dataset")->required();
    s_report->add_option("--metrics", rp.metrics, "Report JSON from evaluate");
    s_report->add_option("--out-dir", rp.out_dir, "Output directory")->required();
    s_report->add_flag("--plots", rp.plots, "Emit SVG histograms, heatmaps and traces");
    s_report->add_flag("--force", rp.force, "Proceed despite a config digest mismatch");

    std::string command;
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "microtrip 0.1.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << error_json("E_USAGE", kExitUsage, e.what(), "") << "\n";
        return kExitUsage;
    }

    const std::vector<std::pair<CLI::App*, std::function<int()>>> table = {
        {s_fixture, [&] { return cmd_fixture(fx, out); }},
        {s_ingest, [&] { return cmd_ingest(ig, out); }},
        {s_cluster, [&] { return cmd_cluster(cl, out); }},
        {s_fit, [&] { return cmd_fit_markov(fm, out); }},
        {s_train, [&] { return cmd_train(tr, out); }},
        {s_gen, [&] { return cmd_generate(gn, out); }},
        {s_eval, [&] { return cmd_evaluate(ev, out); }},
        {s_report, [&] { return cmd_report(rp, out); }},
    };
    for (const auto& [sub, fn] : table) {
        if (!sub->parsed()) {
            continue;
        }
        command = sub->get_name();
        try {
            return fn();
        } catch (const Error& e) {
            const int code = exit_code_for(e.code());
            err << error_json(error_code_name(e.code()), code, e.what(), command) << "\n";
            return code;
        } catch (const fs::filesystem_error& e) {
            err << error_json("E_IO", kExitMissingArtifact, e.what(), command) << "\n";
            return kExitMissingArtifact;
        } catch (const std::exception& e) {
            err << error_json("E_INTERNAL", kExitNumerical, e.what(), command) << "\n";
            return kExitNumerical;
        }
    }
    err << error_json("E_USAGE", kExitUsage, "no command given", "") << "\n";
    return kExitUsage;
}

} // namespace microtrip::cli
