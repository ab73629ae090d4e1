// fluxfed: clustered federated learning simulator.
//
// Subcommands: gen-data, train, eval, sweep, verify. Exit codes: 0 success,
// 1 runtime failure, 2 usage or config error. stdout carries no run output;
// results land in files under --out and diagnostics go to stderr
// (FLUX_FED_LOG or --log-level selects verbosity).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fluxfed/clustering.hpp"
#include "fluxfed/config.hpp"
#include "fluxfed/datagen.hpp"
#include "fluxfed/dataset_io.hpp"
#include "fluxfed/descriptor.hpp"
#include "fluxfed/errors.hpp"
#include "fluxfed/federation.hpp"
#include "fluxfed/gauss_metric.hpp"
#include "fluxfed/logging.hpp"
#include "fluxfed/mlp.hpp"
#include "fluxfed/rng.hpp"

namespace fs = std::filesystem;
using namespace fluxfed;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr const char* kMetricsSchema = "metrics-v1";
constexpr const char* kMetricsHeader =
    "run_id,mode,shift_type,level,seed,known_assoc_acc,test_phase_acc,M_found,M_true,"
    "wall_time_ms\n";

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string iso_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw ConfigError("write failed for " + path.string());
}

struct Overrides {
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<double> dp_epsilon;  // <= 0 switches privacy noise off
    std::optional<double> scale;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
    if (ov.mode) cfg.mode = mode_from_string(*ov.mode);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.dp_epsilon) {
        if (*ov.dp_epsilon > 0.0)
            cfg.dp_epsilon = *ov.dp_epsilon;
        else
            cfg.dp_epsilon.reset();
    }
    if (ov.scale) cfg.dbscan_scale = *ov.scale;
    validate_config(cfg);
}

// Loads the serialized federation when a directory is given, otherwise
// regenerates it from the config. A loaded directory must agree with the
// config on everything that shapes the run; silent mismatches would break
// the determinism contract.
FederationData obtain_data(const ExperimentConfig& cfg, const std::string& data_dir) {
    if (data_dir.empty()) {
        FederationData d;
        d.meta = FederationMeta{cfg.seed, cfg.shift, cfg.num_classes, cfg.feature_dim};
        d.train = gen_synthetic_federation(cfg.num_clients, cfg.synthetic(), cfg.shift, cfg.seed);
        FederationPlan plan = build_plan(cfg.synthetic(), cfg.shift, cfg.seed);
        d.test = gen_test_clients(plan, cfg.synthetic(), cfg.test_per_distribution,
                                  static_cast<int>(cfg.num_clients), cfg.seed);
        return d;
    }
    FederationData d = load_federation(data_dir);
    if (d.meta.seed != cfg.seed) throw ConfigError("data: seed does not match config");
    if (d.meta.num_classes != cfg.num_classes)
        throw ConfigError("data: num_classes does not match config");
    if (d.meta.feature_dim != cfg.feature_dim)
        throw ConfigError("data: feature_dim does not match config");
    if (d.meta.shift.type != cfg.shift.type || d.meta.shift.level != cfg.shift.level ||
        d.meta.shift.num_distributions != cfg.shift.num_distributions)
        throw ConfigError("data: shift does not match config");
    if (d.train.size() != cfg.num_clients)
        throw ConfigError("data: num_clients does not match config");
    for (const ClientDataset& ds : d.train)
        if (ds.samples() != cfg.samples_per_client)
            throw ConfigError("data: samples_per_client does not match config");
    return d;
}

bool test_phase_applicable(const ExperimentConfig& cfg, std::size_t num_test) {
    // Label-relabeling shifts leave P(X) untouched, so no label-free statistic
    // can separate the distributions; the metric is reported as not applicable.
    return num_test > 0 && cfg.shift.type != ShiftType::ConceptYgivenX;
}

std::string metrics_row(const ExperimentConfig& cfg, int m_found, double known_acc,
                        std::optional<double> test_acc, long long wall_ms) {
    std::string row = run_id(cfg);
    row += ',';
    row += to_string(cfg.mode);
    row += ',';
    row += to_string(cfg.shift.type);
    row += ',';
    row += std::to_string(cfg.shift.level);
    row += ',';
    row += std::to_string(cfg.seed);
    row += ',';
    row += fmt_double(known_acc);
    row += ',';
    row += test_acc ? fmt_double(*test_acc) : std::string("na");
    row += ',';
    row += std::to_string(m_found);
    row += ',';
    row += std::to_string(cfg.shift.num_distributions);
    row += ',';
    row += std::to_string(wall_ms);
    row += '\n';
    return row;
}

void write_run_manifest(const fs::path& out_dir, const ExperimentConfig& cfg,
                        const std::string& started, const std::string& finished,
                        const std::vector<std::string>& outputs) {
    json j;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    j["config_hash"] = hex;
    j["tool_version"] = kToolVersion;
    j["metrics_schema"] = kMetricsSchema;
    j["started_at"] = started;
    j["finished_at"] = finished;
    j["outputs"] = outputs;
    write_text(out_dir / "run_manifest.json", j.dump(2) + "\n");
}

// ---- subcommands ----------------------------------------------------------

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 const Overrides& ov) {
    ExperimentConfig cfg = load_config_file(config_path);
    apply_overrides(cfg, ov);
    FederationData data = obtain_data(cfg, "");
    fs::create_directories(out_dir);
    save_federation(out_dir, data);
    FLUX_FED_LOG(LogLevel::Info, "wrote " << data.train.size() << " train + "
                                 << data.test.size() << " test clients to " << out_dir);
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const Overrides& ov, int threads) {
    ExperimentConfig cfg = load_config_file(config_path);
    apply_overrides(cfg, ov);
    std::string started = iso_utc_now();
    FederationData data = obtain_data(cfg, data_dir);

    auto t0 = std::chrono::steady_clock::now();
    RunResult rr = run_experiment(cfg, data.train, data.test, threads);
    auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();

    fs::create_directories(out_dir);
    fs::path out(out_dir);

    std::string rounds;
    for (const RoundRecord& rec : rr.state.rounds) rounds += round_record_to_json_line(rec) + "\n";
    write_text(out / "rounds.jsonl", rounds);

    save_federation_state((out / "state.json").string(), rr.state);

    int m_found = rr.state.triggered ? rr.state.clusters.num_clusters : 1;
    std::optional<double> test_acc;
    if (test_phase_applicable(cfg, data.test.size()))
        test_acc = rr.inferred.pooled_accuracy;
    write_text(out / "metrics.csv",
               std::string(kMetricsHeader) +
                   metrics_row(cfg, m_found, rr.known.pooled_accuracy, test_acc, wall_ms));

    write_run_manifest(out, cfg, started, iso_utc_now(),
                       {"rounds.jsonl", "state.json", "metrics.csv"});
    FLUX_FED_LOG(LogLevel::Info,
                 "run " << run_id(cfg) << ": known_assoc_acc="
                        << fmt_double(rr.known.pooled_accuracy) << " M_found=" << m_found
                        << " L/p=" << fmt_double(rr.l_over_p));
    return 0;
}

int cmd_eval(const std::string& state_path, const std::string& data_dir,
             const std::string& out_dir, int threads) {
    FederationState st = load_federation_state(state_path);
    const ExperimentConfig& cfg = st.cfg;
    std::string started = iso_utc_now();
    FederationData data = obtain_data(cfg, data_dir);

    auto t0 = std::chrono::steady_clock::now();
    TestInference inferred = infer_test_clients(st, data.test, threads);
    TestInference known = evaluate_known_association(st, data.train, data.test, threads);
    auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();

    fs::create_directories(out_dir);
    fs::path out(out_dir);

    int m_found = st.triggered ? st.clusters.num_clusters : 1;
    std::optional<double> test_acc;
    if (test_phase_applicable(cfg, data.test.size())) test_acc = inferred.pooled_accuracy;
    write_text(out / "eval_metrics.csv",
               std::string(kMetricsHeader) +
                   metrics_row(cfg, m_found, known.pooled_accuracy, test_acc, wall_ms));

    std::string rows = "client_id,distribution_id,assigned_cluster,accuracy\n";
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        rows += std::to_string(data.test[i].client_id);
        rows += ',';
        rows += std::to_string(data.test[i].distribution_id);
        rows += ',';
        rows += std::to_string(inferred.assigned_cluster[i]);
        rows += ',';
        rows += fmt_double(inferred.client_accuracy[i]);
        rows += '\n';
    }
    write_text(out / "eval_assignments.csv", rows);
    write_run_manifest(out, cfg, started, iso_utc_now(),
                       {"eval_metrics.csv", "eval_assignments.csv"});
    return 0;
}

struct SweepSpec {
    ExperimentConfig base;
    std::vector<std::string> modes;
    std::vector<std::string> shift_types;
    std::vector<int> levels;
    std::vector<std::uint64_t> seeds;
};

SweepSpec load_sweep_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("sweep: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("sweep: ") + e.what());
    }
    if (!j.is_object() || !j.contains("base"))
        throw ConfigError("sweep: expected an object with a \"base\" config");
    for (const auto& item : j.items()) {
        const std::string& k = item.key();
        if (k != "base" && k != "modes" && k != "shift_types" && k != "levels" && k != "seeds")
            throw ConfigError("sweep: unknown key \"" + k + "\"");
    }
    SweepSpec spec;
    spec.base = config_from_json_text(j.at("base").dump());
    try {
        if (j.contains("modes")) spec.modes = j.at("modes").get<std::vector<std::string>>();
        if (j.contains("shift_types"))
            spec.shift_types = j.at("shift_types").get<std::vector<std::string>>();
        if (j.contains("levels")) spec.levels = j.at("levels").get<std::vector<int>>();
        if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception&) {
        throw ConfigError("sweep: modes/shift_types/levels/seeds must be arrays");
    }
    if (spec.modes.empty()) spec.modes = {to_string(spec.base.mode)};
    if (spec.shift_types.empty()) spec.shift_types = {to_string(spec.base.shift.type)};
    if (spec.levels.empty()) spec.levels = {spec.base.shift.level};
    if (spec.seeds.empty()) spec.seeds = {spec.base.seed};
    return spec;
}

struct CellStats {
    std::vector<double> known, test;
    std::size_t attempted = 0, failed = 0;
    bool test_applicable = true;
};

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());  // population convention
    sd = std::sqrt(var);
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int threads) {
    SweepSpec spec = load_sweep_spec(config_path);
    fs::create_directories(out_dir);
    fs::path out(out_dir);
    fs::create_directories(out / "rounds");

    std::string started = iso_utc_now();
    std::string runs_csv = kMetricsHeader;
    std::string agg_csv =
        "mode,shift_type,level,seeds_ok,known_assoc_mean,known_assoc_std,test_phase_mean,"
        "test_phase_std,status\n";

    for (const std::string& mode_s : spec.modes) {
        for (const std::string& shift_s : spec.shift_types) {
            for (int level : spec.levels) {
                CellStats cell;
                for (std::uint64_t seed : spec.seeds) {
                    ExperimentConfig cfg = spec.base;
                    cfg.mode = mode_from_string(mode_s);
                    cfg.shift.type = shift_type_from_string(shift_s);
                    cfg.shift.level = level;
                    cfg.seed = seed;
                    ++cell.attempted;
                    try {
                        validate_config(cfg);
                        FederationData data = obtain_data(cfg, "");
                        auto t0 = std::chrono::steady_clock::now();
                        RunResult rr = run_experiment(cfg, data.train, data.test, threads);
                        auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                           std::chrono::steady_clock::now() - t0)
                                           .count();
                        int m_found = rr.state.triggered ? rr.state.clusters.num_clusters : 1;
                        cell.test_applicable = test_phase_applicable(cfg, data.test.size());
                        std::optional<double> test_acc;
                        if (cell.test_applicable) test_acc = rr.inferred.pooled_accuracy;
                        runs_csv += metrics_row(cfg, m_found, rr.known.pooled_accuracy, test_acc,
                                                wall_ms);
                        std::string rounds_text;
                        for (const RoundRecord& rec : rr.state.rounds)
                            rounds_text += round_record_to_json_line(rec) + "\n";
                        write_text(out / "rounds" / (run_id(cfg) + ".jsonl"), rounds_text);
                        cell.known.push_back(rr.known.pooled_accuracy);
                        if (test_acc) cell.test.push_back(*test_acc);
                    } catch (const std::exception& e) {
                        ++cell.failed;
                        FLUX_FED_LOG(LogLevel::Error, "sweep cell (" << mode_s << "," << shift_s
                                                      << ",L" << level << ",s" << seed
                                                      << ") failed: " << e.what());
                        runs_csv += run_id(cfg) + "," + mode_s + "," + shift_s + "," +
                                    std::to_string(level) + "," + std::to_string(seed) +
                                    ",failed,failed,0," +
                                    std::to_string(cfg.shift.num_distributions) + ",0\n";
                    }
                }
                agg_csv += mode_s + "," + shift_s + "," + std::to_string(level) + "," +
                           std::to_string(cell.known.size()) + ",";
                if (!cell.known.empty()) {
                    double m = 0, s = 0;
                    mean_std(cell.known, m, s);
                    agg_csv += fmt_double(m) + "," + fmt_double(s) + ",";
                } else {
                    agg_csv += "failed,failed,";
                }
                if (!cell.test.empty()) {
                    double m = 0, s = 0;
                    mean_std(cell.test, m, s);
                    agg_csv += fmt_double(m) + "," + fmt_double(s) + ",";
                } else if (cell.test_applicable && cell.known.empty()) {
                    agg_csv += "failed,failed,";
                } else {
                    agg_csv += "na,na,";
                }
                agg_csv += (cell.failed == 0 ? "ok" : "failed");
                agg_csv += '\n';
            }
        }
    }

    write_text(out / "sweep_runs.csv", runs_csv);
    write_text(out / "sweep.csv", agg_csv);
    write_run_manifest(out, spec.base, started, iso_utc_now(),
                       {"sweep_runs.csv", "sweep.csv", "rounds/"});
    return 0;
}

// ---- verify suites --------------------------------------------------------

bool verify_prop1() {
    RngStream rng = derive_stream(0x76657269, 1);
    const int trials = 10000;
    int bad = 0;
    for (int t = 0; t < trials; ++t) {
        std::size_t l = 1 + rng.next_index(16);
        GaussianSummary a, b;
        a.mean.resize(l);
        a.sigma.resize(l);
        b.mean.resize(l);
        b.sigma.resize(l);
        double lo = 0.3, hi = 2.0;
        for (std::size_t i = 0; i < l; ++i) {
            a.mean[i] = -3.0 + 6.0 * rng.next_real();
            b.mean[i] = -3.0 + 6.0 * rng.next_real();
            a.sigma[i] = lo + (hi - lo) * rng.next_real();
            b.sigma[i] = lo + (hi - lo) * rng.next_real();
        }
        BoundCheck chk = check_w2_bound(a, b, lo * lo, hi * hi);
        if (!chk.holds) ++bad;
    }
    std::printf("prop1: %s (%d/%d sandwich checks)\n", bad == 0 ? "pass" : "FAIL",
                trials - bad, trials);
    return bad == 0;
}

bool verify_dp_sampler() {
    RngStream rng = derive_stream(0x76657269, 2);
    const int n = 200000;
    const double b = 1.5;
    double sum = 0, sum_abs = 0, sum_sq = 0;
    for (int i = 0; i < n; ++i) {
        double x = laplace_draw(b, rng);
        sum += x;
        sum_abs += std::fabs(x);
        sum_sq += x * x;
    }
    double mean = sum / n, mad = sum_abs / n, var = sum_sq / n - mean * mean;
    bool ok = std::fabs(mean) < 0.02 * b && std::fabs(mad - b) < 0.02 * b &&
              std::fabs(var - 2 * b * b) < 0.10 * b * b;
    std::printf("dp-sampler: %s (mean %.4f, E|x| %.4f vs %.4f, var %.4f vs %.4f)\n",
                ok ? "pass" : "FAIL", mean, mad, b, var, 2 * b * b);
    return ok;
}

bool verify_clustering() {
    RngStream rng = derive_stream(0x76657269, 3);
    int failures = 0;
    const std::size_t dim = 20;  // concentrated neighbor distances -> stable radius choice
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t groups = 2 + rng.next_index(3);
        std::size_t per = 4 + rng.next_index(5);
        std::vector<DescriptorVector> descs;
        for (std::size_t g = 0; g < groups; ++g) {
            for (std::size_t i = 0; i < per; ++i) {
                DescriptorVector d;
                d.label_free_len = dim;
                d.sample_count = 10;
                d.values.resize(dim);
                for (std::size_t c = 0; c < dim; ++c) d.values[c] = rng.next_gaussian();
                d.values[0] += static_cast<double>(g) * 50.0;
                descs.push_back(std::move(d));
            }
        }
        ClusterState cs = dbscan_adaptive(descs, 2.0);
        // partition sanity
        if (cs.assignment.size() != descs.size()) ++failures;
        std::vector<int> seen;
        for (int c : cs.assignment) {
            if (c < 0 || c >= cs.num_clusters) ++failures;
        }
        // canonical ids: first occurrence of each cluster id is ascending
        int next_expected = 0;
        for (int c : cs.assignment)
            if (c == next_expected) ++next_expected;
        if (next_expected != cs.num_clusters) ++failures;
        if (cs.num_clusters != static_cast<int>(groups)) ++failures;
    }
    std::printf("clustering: %s (50 planted partitions)\n", failures == 0 ? "pass" : "FAIL");
    return failures == 0;
}

bool verify_gradcheck() {
    RngStream rng = derive_stream(0x76657269, 4);
    int bad = 0, total = 0;
    for (int cfg_i = 0; cfg_i < 10; ++cfg_i) {
        std::size_t z = 2 + rng.next_index(5);
        std::size_t v = 2 + rng.next_index(6);
        std::size_t u = 2 + rng.next_index(4);
        std::size_t s = 5 + rng.next_index(8);
        MlpModel model(z, v, u);
        model.init(rng);
        Matrix x(s, z);
        std::vector<int> y(s);
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < z; ++j) x.at(i, j) = rng.next_gaussian();
            y[i] = static_cast<int>(rng.next_index(u));
        }
        DataView view{&x, &y, 0, s};
        ParamVector grad;
        model.loss_and_gradient(view, grad);
        for (int trial = 0; trial < 10; ++trial) {
            std::size_t w = rng.next_index(model.param_count());
            ParamVector p = model.params();
            double h = 1e-6 * std::max(1.0, std::fabs(p[w]));
            MlpModel probe = model;
            p[w] += h;
            probe.set_params(p);
            double up = probe.loss(view);
            p[w] -= 2 * h;
            probe.set_params(p);
            double dn = probe.loss(view);
            p[w] += h;
            double fd = (up - dn) / (2 * h);
            double denom = std::max({1e-8, std::fabs(fd), std::fabs(grad[w])});
            ++total;
            if (std::fabs(fd - grad[w]) / denom > 1e-4) ++bad;
        }
    }
    std::printf("gradcheck: %s (%d/%d finite-difference probes)\n", bad == 0 ? "pass" : "FAIL",
                total - bad, total);
    return bad == 0;
}

int cmd_verify(std::vector<std::string> suites) {
    if (suites.empty()) suites = {"all"};
    const std::vector<std::string> known = {"prop1", "dp-sampler", "clustering", "gradcheck",
                                            "all"};
    for (const std::string& s : suites)
        if (std::find(known.begin(), known.end(), s) == known.end()) {
            std::fprintf(stderr, "verify: unknown suite \"%s\" (expected prop1|dp-sampler|"
                                 "clustering|gradcheck|all)\n",
                         s.c_str());
            return 2;
        }
    auto wants = [&](const char* name) {
        for (const std::string& s : suites)
            if (s == "all" || s == name) return true;
        return false;
    };
    bool ok = true;
    if (wants("prop1")) ok = verify_prop1() && ok;
    if (wants("dp-sampler")) ok = verify_dp_sampler() && ok;
    if (wants("clustering")) ok = verify_clustering() && ok;
    if (wants("gradcheck")) ok = verify_gradcheck() && ok;
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("FLUX_FED_LOG")) {
        try {
            set_log_level(log_level_from_string(env));
        } catch (const std::invalid_argument& e) {
            std::fprintf(stderr, "FLUX_FED_LOG: %s\n", e.what());
            return 2;
        }
    }

    CLI::App app{"Clustered federated learning simulator with descriptor-based client grouping"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, state_path, log_level_s;
    std::vector<std::string> suites;
    Overrides ov;
    std::string mode_s;
    std::uint64_t seed_v = 0;
    double dp_v = 0.0, scale_v = 0.0;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;

    auto add_common = [&](CLI::App* cmd, bool with_overrides) {
        cmd->add_option("--threads", threads, "Worker threads (results are thread-invariant)");
        cmd->add_option("--log-level", log_level_s, "debug|info|warn|error|off");
        if (with_overrides) {
            cmd->add_option("--mode", mode_s, "Override mode: fedavg|flux|flux-prior");
            cmd->add_option("--seed", seed_v, "Override master seed");
            cmd->add_option("--dp-epsilon", dp_v, "Override privacy budget (<= 0 disables)");
            cmd->add_option("--scale", scale_v, "Override the density-radius scale");
        }
    };

    CLI::App* gen = app.add_subcommand("gen-data", "Generate and serialize a federation");
    gen->add_option("--config", config_path, "Experiment config JSON")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();
    add_common(gen, true);

    CLI::App* train = app.add_subcommand("train", "Run the federated experiment");
    train->add_option("--config", config_path, "Experiment config JSON")->required();
    train->add_option("--data", data_dir, "Serialized federation directory (default: generate)");
    train->add_option("--out", out_dir, "Output directory")->required();
    add_common(train, true);

    CLI::App* eval = app.add_subcommand("eval", "Score a trained state against test clients");
    eval->add_option("--state", state_path, "state.json from a train run")->required();
    eval->add_option("--data", data_dir, "Serialized federation directory (default: generate)");
    eval->add_option("--out", out_dir, "Output directory")->required();
    add_common(eval, false);

    CLI::App* sweep = app.add_subcommand("sweep", "Run a grid of experiments and aggregate");
    sweep->add_option("--config", config_path, "Sweep spec JSON (base + grid axes)")->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();
    add_common(sweep, false);

    CLI::App* verify = app.add_subcommand("verify", "Run property suites");
    verify->add_option("suites", suites, "prop1|dp-sampler|clustering|gradcheck|all");
    add_common(verify, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!log_level_s.empty()) set_log_level(log_level_from_string(log_level_s));
        if (gen->count("--mode") || train->count("--mode")) ov.mode = mode_s;
        if (gen->count("--seed") || train->count("--seed")) ov.seed = seed_v;
        if (gen->count("--dp-epsilon") || train->count("--dp-epsilon")) ov.dp_epsilon = dp_v;
        if (gen->count("--scale") || train->count("--scale")) ov.scale = scale_v;

        if (app.got_subcommand(gen)) return cmd_gen_data(config_path, out_dir, ov);
        if (app.got_subcommand(train))
            return cmd_train(config_path, data_dir, out_dir, ov, threads);
        if (app.got_subcommand(eval)) return cmd_eval(state_path, data_dir, out_dir, threads);
        if (app.got_subcommand(sweep)) return cmd_sweep(config_path, out_dir, threads);
        if (app.got_subcommand(verify)) return cmd_verify(suites);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
