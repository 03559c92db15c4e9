// SPDX-License-Identifier: Apache-2.0
//
// csimap: config-driven front door for the uplink-to-downlink estimation
// pipeline. Subcommands: validate, synth, baseline, train-eval, sweep,
// heatmap. Every command is a pure function of (config, input files, seed);
// reruns produce byte-identical outputs. Exit codes: 0 success, 2 config
// error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "csimap/dataset.hpp"
#include "csimap/errors.hpp"
#include "csimap/estimator.hpp"
#include "csimap/eval.hpp"
#include "csimap/io.hpp"
#include "csimap/kernels.hpp"
#include "csimap/metrics.hpp"
#include "csimap/neural.hpp"
#include "csimap/rng.hpp"
#include "csimap/sum.hpp"
#include "csimap/svg.hpp"
#include "csimap/synth.hpp"

using namespace csimap;
using nlohmann::json;

namespace {

constexpr const char* kEstimatorKinds[] = {
    "random",      "principal",      "dnn",
    "dnn_dropout", "encdec_free",    "encdec_azimuth",
    "encdec_azimuth_elevation",
};

struct EstimatorSpec {
    std::string kind = "dnn";
    std::string id; // defaults to kind
    TrainConfig train;
    double dropout_rate = 0.25;          // dnn_dropout
    std::size_t latent_dim = 1;          // encdec_free
    std::vector<std::size_t> widths;     // direct-net dense widths, empty = defaults
};

struct SynthSpec {
    std::size_t positions = 1000;
    double x_min = 0.8, x_max = 5.8;
    double y_min = -2.8, y_max = 2.8;
    double z = 0.8;
    std::size_t scatterers = 0; // used only when no scene file is given
};

struct RunConfig {
    std::string dataset;    // binary dataset path
    std::string scene;      // scene JSON path (synthetic input)
    std::string checkpoint; // optional pre-trained estimator (heatmap)
    SynthSpec synth;
    IndexRange ul_range = kDefaultUlRange;
    std::size_t dl_index = kDefaultDlIndex;
    CheckerboardSplit split;
    std::vector<EstimatorSpec> estimators;
    std::vector<double> a_values;
    double cell_size = 0.25;
    std::size_t mc_draws = 100000;
    std::uint64_t seed = 1;
};

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* k : known)
            ok |= key == k;
        if (!ok)
            throw ConfigError("unknown config key \"" + key + "\" in " + where);
    }
}

EstimatorSpec parse_estimator(const json& j) {
    if (!j.is_object())
        throw ConfigError("estimator spec must be a JSON object");
    reject_unknown_keys(j,
                        {"kind", "id", "epochs", "batch_size", "learning_rate", "optimizer",
                         "beta1", "beta2", "epsilon", "dropout", "latent_dim", "widths"},
                        "estimator spec");
    EstimatorSpec spec;
    spec.kind = j.value("kind", spec.kind);
    bool known = false;
    for (const char* k : kEstimatorKinds)
        known |= spec.kind == k;
    if (!known)
        throw ConfigError("unknown estimator kind \"" + spec.kind + "\"");
    spec.id = j.value("id", spec.kind);
    spec.train.epochs = j.value("epochs", spec.train.epochs);
    spec.train.batch_size = j.value("batch_size", spec.train.batch_size);
    spec.train.learning_rate = j.value("learning_rate", spec.train.learning_rate);
    spec.train.beta1 = j.value("beta1", spec.train.beta1);
    spec.train.beta2 = j.value("beta2", spec.train.beta2);
    spec.train.epsilon = j.value("epsilon", spec.train.epsilon);
    if (j.contains("optimizer")) {
        const std::string opt = j["optimizer"];
        if (opt == "adam")
            spec.train.optimizer = Optimizer::adam;
        else if (opt == "sgd")
            spec.train.optimizer = Optimizer::sgd;
        else
            throw ConfigError("unknown optimizer \"" + opt + "\"");
    }
    spec.dropout_rate = j.value("dropout", spec.dropout_rate);
    spec.latent_dim = j.value("latent_dim", spec.latent_dim);
    if (j.contains("widths"))
        spec.widths = j["widths"].get<std::vector<std::size_t>>();
    spec.train.validate();
    return spec;
}

RunConfig parse_config(const json& j) {
    reject_unknown_keys(j,
                        {"dataset", "scene", "checkpoint", "synth", "ul_range", "dl_index",
                         "split", "estimator", "estimators", "a_values", "cell_size",
                         "mc_draws", "seed"},
                        "the run config");
    RunConfig cfg;
    cfg.dataset = j.value("dataset", cfg.dataset);
    cfg.scene = j.value("scene", cfg.scene);
    cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
    if (j.contains("synth")) {
        const json& s = j["synth"];
        reject_unknown_keys(
            s, {"positions", "x_range", "y_range", "z", "scatterers"}, "synth");
        cfg.synth.positions = s.value("positions", cfg.synth.positions);
        if (s.contains("x_range")) {
            cfg.synth.x_min = s["x_range"].at(0);
            cfg.synth.x_max = s["x_range"].at(1);
        }
        if (s.contains("y_range")) {
            cfg.synth.y_min = s["y_range"].at(0);
            cfg.synth.y_max = s["y_range"].at(1);
        }
        cfg.synth.z = s.value("z", cfg.synth.z);
        cfg.synth.scatterers = s.value("scatterers", cfg.synth.scatterers);
        if (!(cfg.synth.positions > 0) || !(cfg.synth.x_max > cfg.synth.x_min) ||
            !(cfg.synth.y_max > cfg.synth.y_min))
            throw ConfigError("synth: positions must be positive and ranges non-empty");
    }
    if (j.contains("ul_range")) {
        reject_unknown_keys(j["ul_range"], {"begin", "end"}, "ul_range");
        cfg.ul_range.begin = j["ul_range"].value("begin", cfg.ul_range.begin);
        cfg.ul_range.end = j["ul_range"].value("end", cfg.ul_range.end);
    }
    cfg.dl_index = j.value("dl_index", cfg.dl_index);
    if (cfg.ul_range.contains(cfg.dl_index))
        throw ConfigError("dl_index " + std::to_string(cfg.dl_index) +
                          " lies inside the uplink range");
    if (j.contains("split")) {
        const json& s = j["split"];
        reject_unknown_keys(s, {"square_side", "origin_x", "origin_y", "parity_for_train"},
                            "split");
        cfg.split.square_side = s.value("square_side", cfg.split.square_side);
        cfg.split.origin_x = s.value("origin_x", cfg.split.origin_x);
        cfg.split.origin_y = s.value("origin_y", cfg.split.origin_y);
        cfg.split.parity_for_train = s.value("parity_for_train", cfg.split.parity_for_train);
    }
    cfg.split.validate();
    if (j.contains("estimator"))
        cfg.estimators.push_back(parse_estimator(j["estimator"]));
    if (j.contains("estimators"))
        for (const json& e : j["estimators"])
            cfg.estimators.push_back(parse_estimator(e));
    if (j.contains("a_values")) {
        cfg.a_values = j["a_values"].get<std::vector<double>>();
        for (double a : cfg.a_values)
            if (!(a > 0.0))
                throw ConfigError("a_values must be positive");
    } else {
        cfg.a_values = default_a_values();
    }
    cfg.cell_size = j.value("cell_size", cfg.cell_size);
    if (!(cfg.cell_size > 0.0))
        throw ConfigError("cell_size must be positive");
    cfg.mc_draws = j.value("mc_draws", cfg.mc_draws);
    if (cfg.mc_draws == 0)
        throw ConfigError("mc_draws must be positive");
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

json estimator_to_json(const EstimatorSpec& spec) {
    json j;
    j["kind"] = spec.kind;
    j["id"] = spec.id;
    j["epochs"] = spec.train.epochs;
    j["batch_size"] = spec.train.batch_size;
    j["learning_rate"] = spec.train.learning_rate;
    j["optimizer"] = spec.train.optimizer == Optimizer::adam ? "adam" : "sgd";
    j["beta1"] = spec.train.beta1;
    j["beta2"] = spec.train.beta2;
    j["epsilon"] = spec.train.epsilon;
    j["dropout"] = spec.dropout_rate;
    j["latent_dim"] = spec.latent_dim;
    j["widths"] = spec.widths;
    return j;
}

// Every effective value, defaults included, for provenance.
json config_to_json(const RunConfig& cfg) {
    json j;
    j["dataset"] = cfg.dataset;
    j["scene"] = cfg.scene;
    j["checkpoint"] = cfg.checkpoint;
    j["synth"] = {{"positions", cfg.synth.positions},
                  {"x_range", {cfg.synth.x_min, cfg.synth.x_max}},
                  {"y_range", {cfg.synth.y_min, cfg.synth.y_max}},
                  {"z", cfg.synth.z},
                  {"scatterers", cfg.synth.scatterers}};
    j["ul_range"] = {{"begin", cfg.ul_range.begin}, {"end", cfg.ul_range.end}};
    j["dl_index"] = cfg.dl_index;
    j["split"] = {{"square_side", cfg.split.square_side},
                  {"origin_x", cfg.split.origin_x},
                  {"origin_y", cfg.split.origin_y},
                  {"parity_for_train", cfg.split.parity_for_train}};
    j["estimators"] = json::array();
    for (const auto& e : cfg.estimators)
        j["estimators"].push_back(estimator_to_json(e));
    j["a_values"] = cfg.a_values;
    j["cell_size"] = cfg.cell_size;
    j["mc_draws"] = cfg.mc_draws;
    j["seed"] = cfg.seed;
    return j;
}

void write_resolved_config(const std::string& out_dir, const RunConfig& cfg) {
    atomic_write_file(out_dir + "/config.resolved.json", config_to_json(cfg).dump(2) + "\n");
}

std::string ensure_out_dir(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    return out_dir;
}

struct LoadedData {
    std::vector<SamplePair> pairs;
    ArrayPose pose;
    std::size_t num_antennas = 0;
};

std::vector<CsiRecord> load_records(const RunConfig& cfg, ArrayPose& pose) {
    if (!cfg.dataset.empty()) {
        std::vector<CsiRecord> records;
        const std::string sidecar = sidecar_path(cfg.dataset);
        if (std::filesystem::exists(sidecar)) {
            const DatasetMeta meta = load_meta(sidecar);
            records = load_dataset(cfg.dataset, meta);
            pose = meta.array_pose;
        } else {
            records = load_dataset(cfg.dataset);
        }
        if (!records.empty() && records[0].csi.cols > kDefaultAvgSubcarriers &&
            records[0].csi.cols % kDefaultAvgSubcarriers == 0)
            for (auto& rec : records)
                rec.csi =
                    average_subcarriers(rec.csi, rec.csi.cols / kDefaultAvgSubcarriers);
        return records;
    }
    if (!cfg.scene.empty()) {
        const Scene scene = scene_from_json(cfg.scene);
        const FrequencyPlan plan = plan_from_json_or_default(cfg.scene);
        pose = scene.array_pose;
        Rng rng(mix_seed(cfg.seed, 0xda7aULL));
        std::vector<Vec3> positions(cfg.synth.positions);
        for (auto& p : positions)
            p = {cfg.synth.x_min + (cfg.synth.x_max - cfg.synth.x_min) * rng.uniform(),
                 cfg.synth.y_min + (cfg.synth.y_max - cfg.synth.y_min) * rng.uniform(),
                 cfg.synth.z};
        return generate_dataset(scene, plan, positions);
    }
    throw ConfigError("config needs a \"dataset\" path or a synthetic \"scene\"");
}

LoadedData load_pairs(const RunConfig& cfg) {
    LoadedData data;
    data.pose.position = {0.0, 0.0, 0.0};
    data.pose.broadside = {1.0, 0.0, 0.0};
    const std::vector<CsiRecord> records = load_records(cfg, data.pose);
    if (records.empty())
        throw DataError("dataset holds no records");
    data.pairs = extract_pairs(records, cfg.ul_range, cfg.dl_index);
    data.num_antennas = data.pairs[0].h_d.size();
    return data;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// estimator construction

struct BuiltEstimator {
    std::unique_ptr<Estimator> estimator;
    std::vector<std::pair<std::string, std::vector<double>>> loss_series;
    std::size_t skipped_batches = 0;
    std::optional<double> latent_azimuth_corr;
};

MlpSpec direct_net_spec(const EstimatorSpec& spec, std::size_t m,
                        std::optional<double> dropout) {
    if (spec.widths.empty())
        return default_dnn_spec(m, dropout);
    // config widths are the hidden layers; input and output are fixed by M
    std::vector<std::size_t> widths;
    widths.push_back(m * 16);
    widths.insert(widths.end(), spec.widths.begin(), spec.widths.end());
    widths.push_back(m * 2);
    std::optional<DropoutSpec> drop;
    if (dropout)
        drop = DropoutSpec{2, *dropout};
    return make_mlp_spec(std::move(widths), Activation::relu, drop);
}

BuiltEstimator build_estimator(const EstimatorSpec& spec, std::span<const SamplePair> train,
                               const ArrayPose& pose, std::uint64_t seed, std::size_t m) {
    BuiltEstimator out;
    TrainConfig cfg = spec.train;
    cfg.seed = seed;
    if (spec.kind == "random") {
        out.estimator = std::make_unique<RandomEstimator>(seed, m);
    } else if (spec.kind == "principal") {
        out.estimator = make_principal_estimator(train);
    } else if (spec.kind == "dnn" || spec.kind == "dnn_dropout") {
        const std::optional<double> drop = spec.kind == "dnn_dropout"
                                               ? std::optional<double>(spec.dropout_rate)
                                               : std::nullopt;
        TrainedDnn trained = train_dnn(direct_net_spec(spec, m, drop), train, cfg, spec.id);
        out.loss_series.emplace_back("loss", std::move(trained.epoch_loss));
        out.skipped_batches = trained.skipped_batches;
        out.estimator = std::move(trained.estimator);
    } else if (spec.kind == "encdec_free") {
        const EncoderDecoderSpec ed =
            default_encdec_spec(LatentMode::free_latent, spec.latent_dim, m);
        TrainedDnn trained = train_free_encdec(ed, train, cfg, spec.id);
        out.loss_series.emplace_back("loss", std::move(trained.epoch_loss));
        out.skipped_batches = trained.skipped_batches;
        out.latent_azimuth_corr = latent_azimuth_correlation(
            *trained.estimator, ed.encoder.num_layers(), train, pose);
        out.estimator = std::move(trained.estimator);
    } else if (spec.kind == "encdec_azimuth" || spec.kind == "encdec_azimuth_elevation") {
        const bool both = spec.kind == "encdec_azimuth_elevation";
        const EncoderDecoderSpec ed = default_encdec_spec(
            both ? LatentMode::azimuth_elevation : LatentMode::azimuth, both ? 2 : 1, m);
        TrainedEncDec trained = train_angle_encdec(ed, train, pose, cfg, spec.id);
        for (std::size_t i = 0; i < trained.encoder_epoch_loss.size(); ++i)
            out.loss_series.emplace_back("encoder_" + std::to_string(i),
                                         std::move(trained.encoder_epoch_loss[i]));
        out.loss_series.emplace_back("decoder", std::move(trained.decoder_epoch_loss));
        out.estimator = std::move(trained.estimator);
    } else {
        throw ConfigError("unknown estimator kind \"" + spec.kind + "\"");
    }
    return out;
}

void write_loss_csv(const std::string& path, const BuiltEstimator& built) {
    if (built.loss_series.empty())
        return;
    std::string csv = "epoch";
    for (const auto& [name, series] : built.loss_series) {
        (void)series;
        csv += "," + name;
    }
    csv += "\n";
    const std::size_t epochs = built.loss_series[0].second.size();
    for (std::size_t e = 0; e < epochs; ++e) {
        csv += std::to_string(e + 1);
        for (const auto& [name, series] : built.loss_series) {
            (void)name;
            csv += "," + fmt(e < series.size() ? series[e] : 0.0);
        }
        csv += "\n";
    }
    atomic_write_file(path, csv);
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_validate(const std::string& dataset_path) {
    std::vector<CsiRecord> records;
    const std::string sidecar = sidecar_path(dataset_path);
    if (std::filesystem::exists(sidecar))
        records = load_dataset(dataset_path, load_meta(sidecar));
    else
        records = load_dataset(dataset_path);
    if (records.empty())
        throw DataError("dataset holds no records");
    for (std::size_t i = 0; i < records.size(); ++i)
        validate_record(records[i], i);

    Vec3 lo = records[0].position, hi = records[0].position;
    for (const auto& rec : records) {
        lo = {std::min(lo.x, rec.position.x), std::min(lo.y, rec.position.y),
              std::min(lo.z, rec.position.z)};
        hi = {std::max(hi.x, rec.position.x), std::max(hi.y, rec.position.y),
              std::max(hi.z, rec.position.z)};
    }
    std::printf("records: %zu\n", records.size());
    std::printf("antennas: %zu\n", records[0].csi.rows);
    std::printf("subcarriers: %zu\n", records[0].csi.cols);
    std::printf("x: [%s, %s] m\n", fmt(lo.x).c_str(), fmt(hi.x).c_str());
    std::printf("y: [%s, %s] m\n", fmt(lo.y).c_str(), fmt(hi.y).c_str());
    std::printf("z: [%s, %s] m\n", fmt(lo.z).c_str(), fmt(hi.z).c_str());
    return 0;
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    const Scene scene = cfg.scene.empty() ? default_scene(cfg.synth.scatterers, cfg.seed)
                                          : scene_from_json(cfg.scene);
    const FrequencyPlan plan =
        cfg.scene.empty() ? default_frequency_plan() : plan_from_json_or_default(cfg.scene);
    scene.validate();
    plan.validate();

    Rng rng(mix_seed(cfg.seed, 0xda7aULL));
    std::vector<Vec3> positions(cfg.synth.positions);
    for (auto& p : positions)
        p = {cfg.synth.x_min + (cfg.synth.x_max - cfg.synth.x_min) * rng.uniform(),
             cfg.synth.y_min + (cfg.synth.y_max - cfg.synth.y_min) * rng.uniform(),
             cfg.synth.z};
    const auto records = generate_dataset(scene, plan, positions);

    ensure_out_dir(out_dir);
    const std::string path = out_dir + "/dataset.bin";
    save_dataset(path, records);
    save_meta(sidecar_path(path), scene_meta(scene, plan));
    write_resolved_config(out_dir, cfg);
    std::printf("wrote %zu records to %s\n", records.size(), path.c_str());
    return 0;
}

int cmd_baseline(const RunConfig& cfg, const std::string& out_dir) {
    const LoadedData data = load_pairs(cfg);
    const std::size_t m = data.num_antennas;

    std::vector<CVector> channels;
    channels.reserve(data.pairs.size());
    for (const auto& p : data.pairs)
        channels.push_back(p.h_d);
    const auto mc =
        kernels::mc_random_powers(mix_seed(cfg.seed, 1), cfg.mc_draws, channels,
                                  ExecMode::parallel);
    const double mc_db = to_db(mean(mc));
    const double theory_db = to_db(1.0 / static_cast<double>(m));

    const RandomEstimator random_est(mix_seed(cfg.seed, 2), m);
    const EvalReport random_report =
        evaluate_seen_unseen(random_est, cfg.split, data.pairs);

    const SplitIndices idx =
        checkerboard_split(std::span<const SamplePair>(data.pairs), cfg.split);
    std::vector<SamplePair> train;
    train.reserve(idx.train.size());
    for (std::size_t i : idx.train)
        train.push_back(data.pairs[i]);
    const auto principal = make_principal_estimator(train);
    const EvalReport principal_report =
        evaluate_seen_unseen(*principal, cfg.split, data.pairs);

    ensure_out_dir(out_dir);
    write_report_csv(out_dir + "/baseline.csv",
                     std::vector<EvalReport>{random_report, principal_report});
    json summary;
    summary["num_pairs"] = data.pairs.size();
    summary["num_antennas"] = m;
    summary["random_mc_db"] = mc_db;
    summary["random_theory_db"] = theory_db;
    summary["random_seen_db"] = random_report.p_seen_db;
    summary["random_unseen_db"] = random_report.p_unseen_db;
    summary["principal_seen_db"] = principal_report.p_seen_db;
    summary["principal_unseen_db"] = principal_report.p_unseen_db;
    atomic_write_file(out_dir + "/baseline.json", summary.dump(2) + "\n");
    write_resolved_config(out_dir, cfg);

    std::printf("random precoding (monte carlo): %s dB (1/M bound: %s dB)\n",
                fmt(mc_db).c_str(), fmt(theory_db).c_str());
    std::printf("principal component: seen %s dB, unseen %s dB\n",
                fmt(principal_report.p_seen_db).c_str(),
                fmt(principal_report.p_unseen_db).c_str());
    return 0;
}

int cmd_train_eval(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.estimators.empty())
        throw ConfigError("train-eval needs an \"estimator\" spec");
    const EstimatorSpec& spec = cfg.estimators.front();
    const LoadedData data = load_pairs(cfg);

    const SplitIndices idx =
        checkerboard_split(std::span<const SamplePair>(data.pairs), cfg.split);
    if (idx.train.empty() || idx.test.empty())
        throw DataError("square side leaves one side of the split empty");
    std::vector<SamplePair> train;
    train.reserve(idx.train.size());
    for (std::size_t i : idx.train)
        train.push_back(data.pairs[i]);

    const BuiltEstimator built =
        build_estimator(spec, train, data.pose, cfg.seed, data.num_antennas);
    const EvalReport report = evaluate_seen_unseen(*built.estimator, cfg.split, data.pairs);

    ensure_out_dir(out_dir);
    write_report_csv(out_dir + "/report.csv", std::vector<EvalReport>{report});
    write_loss_csv(out_dir + "/epoch_loss.csv", built);
    try {
        save_checkpoint(out_dir + "/checkpoint.bin", *built.estimator);
    } catch (const DataError&) {
        // the random baseline is not checkpointable; nothing to persist
    }
    json summary;
    summary["estimator_id"] = report.estimator_id;
    summary["train_size"] = idx.train.size();
    summary["test_size"] = idx.test.size();
    summary["p_seen_db"] = report.p_seen_db;
    summary["p_unseen_db"] = report.p_unseen_db;
    summary["gap_db"] = report.gap_db;
    summary["skipped_batches"] = built.skipped_batches;
    if (built.latent_azimuth_corr)
        summary["latent_azimuth_correlation"] = *built.latent_azimuth_corr;
    atomic_write_file(out_dir + "/summary.json", summary.dump(2) + "\n");
    write_resolved_config(out_dir, cfg);

    std::printf("%s: seen %s dB, unseen %s dB, gap %s dB\n", report.estimator_id.c_str(),
                fmt(report.p_seen_db).c_str(), fmt(report.p_unseen_db).c_str(),
                fmt(report.gap_db).c_str());
    if (built.latent_azimuth_corr)
        std::printf("latent/azimuth correlation: %s\n",
                    fmt(*built.latent_azimuth_corr).c_str());
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.estimators.empty())
        throw ConfigError("sweep needs at least one estimator");
    const LoadedData data = load_pairs(cfg);
    const std::size_t m = data.num_antennas;
    const double random_bound_db = to_db(1.0 / static_cast<double>(m));

    ensure_out_dir(out_dir);
    std::vector<SweepEntry> all_entries;
    std::string merged_csv;
    for (std::size_t i = 0; i < cfg.estimators.size(); ++i) {
        const EstimatorSpec spec = cfg.estimators[i];
        const ArrayPose pose = data.pose;
        const EstimatorFactory factory =
            [&spec, &pose, m](std::span<const SamplePair> train,
                              std::uint64_t seed) -> std::unique_ptr<Estimator> {
            return build_estimator(spec, train, pose, seed, m).estimator;
        };
        const auto entries = sweep_grid(data.pairs, factory, cfg.a_values, cfg.split,
                                        mix_seed(cfg.seed, 1000 + i));
        const auto reports = collect_reports(entries);
        write_report_csv(out_dir + "/sweep_" + spec.id + ".csv", reports);
        for (const auto& e : entries)
            if (!e.error.empty())
                std::fprintf(stderr, "warning: %s a=%s: %s\n", spec.id.c_str(),
                             fmt(e.a).c_str(), e.error.c_str());
        all_entries.insert(all_entries.end(), entries.begin(), entries.end());
    }

    // constant principal-component baseline per square side, for reference
    const EstimatorFactory principal_factory =
        [](std::span<const SamplePair> train, std::uint64_t) -> std::unique_ptr<Estimator> {
        return make_principal_estimator(train);
    };
    const auto principal_entries = sweep_grid(data.pairs, principal_factory, cfg.a_values,
                                              cfg.split, mix_seed(cfg.seed, 999));
    const auto baselines = collect_reports(principal_entries);

    std::vector<EvalReport> merged = collect_reports(all_entries);
    write_report_csv(out_dir + "/sweep.csv", merged);
    write_report_csv(out_dir + "/sweep_principal.csv", baselines);
    write_sweep_svg(out_dir + "/sweep.svg", all_entries, baselines, random_bound_db,
                    "seen/unseen mean power across square sides");
    write_resolved_config(out_dir, cfg);

    std::printf("%zu reports across %zu estimators (random bound %s dB)\n", merged.size(),
                cfg.estimators.size(), fmt(random_bound_db).c_str());
    return 0;
}

int cmd_heatmap(const RunConfig& cfg, const std::string& out_dir) {
    const LoadedData data = load_pairs(cfg);
    std::unique_ptr<Estimator> estimator;
    if (!cfg.checkpoint.empty()) {
        estimator = load_checkpoint(cfg.checkpoint);
    } else {
        if (cfg.estimators.empty())
            throw ConfigError("heatmap needs an \"estimator\" spec or a \"checkpoint\" path");
        const SplitIndices idx =
            checkerboard_split(std::span<const SamplePair>(data.pairs), cfg.split);
        if (idx.train.empty())
            throw DataError("square side leaves the train side of the split empty");
        std::vector<SamplePair> train;
        train.reserve(idx.train.size());
        for (std::size_t i : idx.train)
            train.push_back(data.pairs[i]);
        estimator = std::move(build_estimator(cfg.estimators.front(), train, data.pose,
                                              cfg.seed, data.num_antennas)
                                  .estimator);
    }

    const HeatmapGrid grid = heatmap(data.pairs, *estimator, cfg.cell_size);
    ensure_out_dir(out_dir);
    write_heatmap_csv(out_dir + "/heatmap.csv", grid);
    write_heatmap_svg(out_dir + "/heatmap.svg", grid,
                      estimator->id() + ": mean received power (dB)");
    write_resolved_config(out_dir, cfg);

    std::size_t occupied = 0;
    for (const auto& cell : grid.cells)
        occupied += cell.count > 0;
    std::printf("%zux%zu grid, %zu occupied cells\n", grid.nx, grid.ny, occupied);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"uplink-to-downlink channel estimation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    std::string dataset_arg;
    std::uint64_t seed_override = 0;
    int threads = 0;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_dir, "output directory (default: out)");
    auto* seed_opt = app.add_option("--seed", seed_override, "override the config seed");
    app.add_option("--threads", threads, "worker thread count (0 = library default)");

    auto* validate_cmd =
        app.add_subcommand("validate", "check a dataset file and print its summary");
    validate_cmd->add_option("dataset", dataset_arg, "dataset file (.bin)");
    auto* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic dataset from a scene");
    auto* baseline_cmd = app.add_subcommand(
        "baseline", "random-precoding and principal-component baselines");
    auto* train_cmd = app.add_subcommand(
        "train-eval", "train the configured estimator and evaluate seen/unseen");
    auto* sweep_cmd =
        app.add_subcommand("sweep", "seen/unseen reports across checkerboard square sides");
    auto* heatmap_cmd =
        app.add_subcommand("heatmap", "per-cell mean received power over the area");
    for (auto* sub : {validate_cmd, synth_cmd, baseline_cmd, train_cmd, sweep_cmd, heatmap_cmd})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
#ifdef _OPENMP
        if (threads > 0)
            omp_set_num_threads(threads);
#endif
        if (validate_cmd->parsed()) {
            std::string path = dataset_arg;
            if (path.empty() && !config_path.empty()) {
                const json j = json::parse(read_file(config_path));
                path = j.value("dataset", std::string());
            }
            if (path.empty())
                throw ConfigError("validate needs a dataset path (argument or config)");
            return cmd_validate(path);
        }

        if (config_path.empty())
            throw ConfigError("this command needs --config <file>");
        json j;
        try {
            j = json::parse(read_file(config_path));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config: invalid JSON: ") + e.what());
        }
        RunConfig cfg = parse_config(j);
        if (seed_opt->count() > 0)
            cfg.seed = seed_override;

        if (synth_cmd->parsed())
            return cmd_synth(cfg, out_dir);
        if (baseline_cmd->parsed())
            return cmd_baseline(cfg, out_dir);
        if (train_cmd->parsed())
            return cmd_train_eval(cfg, out_dir);
        if (sweep_cmd->parsed())
            return cmd_sweep(cfg, out_dir);
        if (heatmap_cmd->parsed())
            return cmd_heatmap(cfg, out_dir);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
