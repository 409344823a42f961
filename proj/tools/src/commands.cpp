#include "commands.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "config_reader.hpp"
#include "experiment.hpp"
#include "unica/errors.hpp"
#include "unica/rng.hpp"
#include "unica/synthetic.hpp"

namespace unica::cli {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

std::uint64_t resolve_seed(ConfigReader& r, const Options& opts) {
    const auto from_config = r.get<std::uint64_t>("seed", kDefaultSeed);
    return opts.seed ? *opts.seed : from_config;
}

void prepare_out(const Options& opts) {
    if (opts.out.empty()) throw ConfigError("--out is required");
    fs::create_directories(opts.out);
}

void write_resolved(const Options& opts, const std::string& command, const Json& resolved) {
    write_json_file(opts.out / (command + ".config.json"), resolved);
}

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

Backbone load_frozen_backbone(const std::string& path) {
    Backbone b = Backbone::load(path);
    b.freeze();
    return b;
}

/// Fields shared by adapt, ablate and seed-sweep.
struct Experiment {
    std::string data;
    std::string backbone;
    FusionConfig fusion;
    TrainConfig train;
    SplitMode split = SplitMode::holdout;
    double test_fraction = 0.1;
    Aggregation aggregation = Aggregation::pooled;
    std::uint64_t seed = kDefaultSeed;

    Json to_json() const {
        return Json{{"data", data},
                    {"backbone", backbone},
                    {"fusion", unica::to_json(fusion)},
                    {"train", unica::to_json(train)},
                    {"split", to_string(split)},
                    {"test_fraction", test_fraction},
                    {"aggregation", to_string(aggregation)},
                    {"seed", seed}};
    }
};

Experiment read_experiment(ConfigReader& r, const Options& opts) {
    Experiment e;
    e.data = r.require<std::string>("data");
    e.backbone = r.require<std::string>("backbone");
    e.fusion = fusion_config_from_json(r.object("fusion"));
    e.seed = resolve_seed(r, opts);
    e.train = train_config_from_json(r.object("train"));
    e.train.seed = e.seed;
    e.split = parse_split_mode(r.get<std::string>("split", "holdout"));
    e.test_fraction = r.get<double>("test_fraction", 0.1);
    e.aggregation = parse_aggregation(r.get<std::string>("aggregation", "pooled"));
    return e;
}

struct Loaded {
    Backbone backbone;
    DataBundle data;
};

Loaded load_experiment(const Experiment& e) {
    Loaded l;
    l.backbone = load_frozen_backbone(e.backbone);
    Dataset ds = load_dataset(e.data);
    check_compatible(ds, l.backbone);
    l.data = make_bundle(dataset_name(e.data), std::move(ds), e.split, e.test_fraction);
    return l;
}

const std::vector<Window>& select_windows(const Splits& s, const std::string& which) {
    if (which == "test") return s.test;
    if (which == "val") return s.val;
    throw ConfigError("field 'windows' must be \"test\" or \"val\", got '" + which + "'");
}

Json frames_to_json(const std::vector<EvalFrame>& frames) {
    Json out = Json::array();
    for (const auto& f : frames) {
        Json rows = Json::array();
        for (std::size_t h = 0; h < f.quantiles.rows(); ++h) {
            Json row = Json::array();
            for (std::size_t k = 0; k < f.quantiles.cols(); ++k) row.push_back(f.quantiles.at(h, k));
            rows.push_back(std::move(row));
        }
        out.push_back(Json{{"series_id", f.series_id}, {"origin", f.origin}, {"quantiles", std::move(rows)}});
    }
    return out;
}

}  // namespace

void cmd_synth(const Options& opts) {
    Json j = read_json_file(opts.config);
    if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
    bool noise = false;
    if (j.contains("noise_covariate")) {
        if (!j["noise_covariate"].is_boolean()) throw ConfigError("synth config field 'noise_covariate' must be a boolean");
        noise = j["noise_covariate"].get<bool>();
        j.erase("noise_covariate");
    }
    SyntheticSpec spec = synthetic_spec_from_json(j);
    if (opts.seed) spec.seed = *opts.seed;
    prepare_out(opts);
    Dataset ds = gen_synthetic(spec);
    if (noise) ds = inject_noise_covariate(ds, derive_seed(spec.seed, "noise"));
    save_dataset(opts.out / "dataset.json", ds);
    Json resolved = to_json(spec);
    resolved["noise_covariate"] = noise;
    write_resolved(opts, "synth", resolved);
}

void cmd_pretrain(const Options& opts) {
    const Json j = read_json_file(opts.config);
    ConfigReader r(j, "pretrain config");
    const std::uint64_t seed = resolve_seed(r, opts);
    const Json* corpus_json = r.find("corpus");
    if (!corpus_json) throw ConfigError("pretrain config: missing required field 'corpus'");
    const BackboneConfig bcfg = backbone_config_from_json(r.object("backbone"));
    PretrainConfig pc;
    pc.steps = r.get<std::size_t>("steps", pc.steps);
    pc.batch_size = r.get<std::size_t>("batch_size", pc.batch_size);
    pc.learning_rate = r.get<double>("learning_rate", pc.learning_rate);
    pc.seed = seed;
    r.finish();

    Json corpus_resolved;
    Dataset corpus;
    if (corpus_json->is_string()) {
        corpus = load_dataset(corpus_json->get<std::string>());
        corpus_resolved = *corpus_json;
    } else if (corpus_json->is_object()) {
        SyntheticSpec spec = synthetic_spec_from_json(*corpus_json);
        spec.seed = derive_seed(seed, "corpus");
        corpus = gen_synthetic(spec);
        corpus_resolved = to_json(spec);
        // The corpus seed always follows the run seed.
        corpus_resolved.erase("seed");
    } else {
        throw ConfigError("pretrain config field 'corpus' must be a dataset path or a synthetic spec object");
    }
    prepare_out(opts);
    Backbone b = pretrain(corpus, bcfg, pc);
    b.freeze();
    b.save(opts.out / "backbone.json");
    write_resolved(opts, "pretrain",
                   Json{{"corpus", corpus_resolved},
                        {"backbone", to_json(bcfg)},
                        {"steps", pc.steps},
                        {"batch_size", pc.batch_size},
                        {"learning_rate", pc.learning_rate},
                        {"seed", seed}});
}

void cmd_adapt(const Options& opts, const std::optional<std::string>& mechanism) {
    const Json j = read_json_file(opts.config);
    ConfigReader r(j, "adapt config");
    Experiment e = read_experiment(r, opts);
    r.finish();
    if (mechanism) e.fusion.mechanism = parse_mechanism(*mechanism);

    Loaded l = load_experiment(e);
    Adapter fresh(l.data.dataset.schema, l.backbone.config(), e.fusion, e.seed);
    const double zero_shot_val =
        l.data.splits.val.empty() ? std::nan("") : evaluate_loss(nullptr, l.backbone, l.data.prepared, l.data.splits.val);
    auto run = train_adapter(l.data.prepared, l.data.splits, l.backbone, std::move(fresh), e.train);

    prepare_out(opts);
    run.adapter.save(opts.out / "adapter.json", l.backbone);
    Json telemetry = run.telemetry.to_json();
    telemetry["zero_shot_val_loss"] = std::isfinite(zero_shot_val) ? Json(zero_shot_val) : Json(nullptr);
    write_json_file(opts.out / "telemetry.json", telemetry);
    write_resolved(opts, "adapt", e.to_json());
}

void cmd_forecast(const Options& opts) {
    const Json j = read_json_file(opts.config);
    ConfigReader r(j, "forecast config");
    const auto data_path = r.require<std::string>("data");
    const auto backbone_path = r.require<std::string>("backbone");
    const auto adapter_path = r.get<std::string>("adapter", "");
    const auto method = r.get<std::string>("method", adapter_path.empty() ? "zero_shot" : "adapter");
    const auto split_mode = parse_split_mode(r.get<std::string>("split", "holdout"));
    const auto test_fraction = r.get<double>("test_fraction", 0.1);
    const auto which = r.get<std::string>("windows", "test");
    r.finish();
    if (method != "adapter" && method != "zero_shot" && method != "naive")
        throw ConfigError("forecast config field 'method' must be adapter, zero_shot or naive, got '" + method + "'");
    if (method == "adapter" && adapter_path.empty())
        throw ConfigError("forecast config: method 'adapter' requires field 'adapter'");
    if (method != "adapter" && !adapter_path.empty())
        throw ConfigError("forecast config: field 'adapter' is only used with method 'adapter'");

    Backbone backbone = load_frozen_backbone(backbone_path);
    Dataset ds = load_dataset(data_path);
    check_compatible(ds, backbone);
    const DataBundle data = make_bundle(dataset_name(data_path), std::move(ds), split_mode, test_fraction);
    const auto& windows = select_windows(data.splits, which);
    const auto& levels = backbone.config().levels;

    std::vector<EvalFrame> frames;
    if (method == "adapter") {
        Adapter adapter = Adapter::load(adapter_path, backbone);
        check_compatible(data.dataset.schema, adapter);
        frames = adapter_frames(adapter, backbone, data.prepared, windows);
    } else if (method == "zero_shot") {
        frames = zero_shot_frames(backbone, data.prepared, windows);
    } else {
        frames = naive_frames(data.prepared, windows, levels.size());
    }

    prepare_out(opts);
    write_json_file(opts.out / "forecasts.json", Json{{"format_version", 1},
                                                      {"kind", "forecasts"},
                                                      {"levels", levels},
                                                      {"context", data.dataset.context},
                                                      {"horizon", data.dataset.horizon},
                                                      {"frames", frames_to_json(frames)}});
    Json resolved{{"data", data_path},
                  {"backbone", backbone_path},
                  {"method", method},
                  {"split", to_string(split_mode)},
                  {"test_fraction", test_fraction},
                  {"windows", which}};
    if (!adapter_path.empty()) resolved["adapter"] = adapter_path;
    write_resolved(opts, "forecast", resolved);
}

void cmd_eval(const Options& opts) {
    const Json j = read_json_file(opts.config);
    ConfigReader r(j, "eval config");
    const auto data_path = r.require<std::string>("data");
    const auto forecasts_path = r.require<std::string>("forecasts");
    const auto aggregation = parse_aggregation(r.get<std::string>("aggregation", "pooled"));
    const auto method = r.get<std::string>("method", "forecast");
    const auto name = r.get<std::string>("dataset", dataset_name(data_path));
    r.finish();

    const Dataset ds = load_dataset(data_path);
    const PreparedDataset pd = prepare(ds);
    const Json fj = read_json_file(forecasts_path);
    std::vector<double> levels;
    std::vector<EvalFrame> frames, naive;
    try {
        if (fj.at("kind").get<std::string>() != "forecasts") throw DataError("eval: '" + forecasts_path + "' is not a forecasts file");
        if (fj.at("context").get<std::size_t>() != ds.context || fj.at("horizon").get<std::size_t>() != ds.horizon)
            throw CompatibilityError("eval: forecasts were made for another context/horizon");
        levels = fj.at("levels").get<std::vector<double>>();
        std::map<std::string, std::size_t> index;
        for (std::size_t s = 0; s < pd.series.size(); ++s) index[pd.series[s].series_id] = s;
        for (const auto& f : fj.at("frames")) {
            const auto id = f.at("series_id").get<std::string>();
            const auto it = index.find(id);
            if (it == index.end()) throw DataError("eval: forecasts refer to unknown series '" + id + "'");
            const WindowData w = make_window(pd, Window{it->second, f.at("origin").get<std::size_t>()});
            const auto rows = f.at("quantiles").get<std::vector<std::vector<double>>>();
            if (rows.size() != ds.horizon) throw DataError("eval: frame of '" + id + "' does not have H rows");
            Tensor q({ds.horizon, levels.size()});
            for (std::size_t h = 0; h < rows.size(); ++h) {
                if (rows[h].size() != levels.size()) throw DataError("eval: frame of '" + id + "' does not have K columns");
                for (std::size_t k = 0; k < levels.size(); ++k) q.at(h, k) = rows[h][k];
            }
            frames.push_back(EvalFrame{w.series_id, w.origin, w.future, std::move(q)});
            naive.push_back(naive_frame(w, levels.size()));
        }
    } catch (const Json::exception& e) {
        throw DataError("eval: malformed forecasts file: " + std::string(e.what()));
    }
    if (frames.empty()) throw DataError("eval: forecasts file has no frames");

    const MetricReport report = normalize_by_naive(name, method, frames, naive, levels, aggregation);
    prepare_out(opts);
    write_json_file(opts.out / "report.json", report.to_json());
    write_resolved(opts, "eval",
                   Json{{"data", data_path},
                        {"forecasts", forecasts_path},
                        {"aggregation", to_string(aggregation)},
                        {"method", method},
                        {"dataset", name}});
}

void cmd_ablate(const Options& opts, const std::optional<std::string>& mode_flag) {
    const Json j = read_json_file(opts.config);
    ConfigReader r(j, "ablate config");
    Experiment e = read_experiment(r, opts);
    const auto config_mode = r.get<std::string>("mode", "");
    r.finish();
    const std::string mode = mode_flag ? *mode_flag : config_mode;
    if (mode.empty()) throw ConfigError("ablate: no mode given (use --mode or the 'mode' field)");
    check_ablation_mode(mode);

    Loaded l = load_experiment(e);
    AblationInput in;
    in.data = &l.data;
    in.backbone = &l.backbone;
    in.fusion = e.fusion;
    in.train = e.train;
    in.aggregation = e.aggregation;
    in.seed = e.seed;
    const AblationResult result = run_ablation(mode, in);

    prepare_out(opts);
    write_json_file(opts.out / "ablation.json", result.to_json());
    write_text_file(opts.out / "ablation.csv", result.to_csv());
    Json resolved = e.to_json();
    resolved["mode"] = mode;
    write_resolved(opts, "ablate", resolved);
}

void cmd_attn_dump(const Options& opts) {
    const Json j = read_json_file(opts.config);
    ConfigReader r(j, "attn-dump config");
    const auto data_path = r.require<std::string>("data");
    const auto backbone_path = r.require<std::string>("backbone");
    const auto adapter_path = r.require<std::string>("adapter");
    const auto split_mode = parse_split_mode(r.get<std::string>("split", "holdout"));
    const auto test_fraction = r.get<double>("test_fraction", 0.1);
    const auto which = r.get<std::string>("windows", "test");
    r.finish();

    Backbone backbone = load_frozen_backbone(backbone_path);
    Adapter adapter = Adapter::load(adapter_path, backbone);
    Dataset ds = load_dataset(data_path);
    check_compatible(ds, backbone);
    check_compatible(ds.schema, adapter);
    const DataBundle data = make_bundle(dataset_name(data_path), std::move(ds), split_mode, test_fraction);

    // Last requested window of every series.
    std::map<std::size_t, Window> last;
    for (const auto& w : select_windows(data.splits, which)) {
        auto it = last.find(w.series);
        if (it == last.end() || it->second.origin < w.origin) last[w.series] = w;
    }

    const ChannelRegistry& reg = adapter.registry();
    const std::size_t T = data.dataset.context, H = data.dataset.horizon;
    std::vector<std::size_t> het_cols;
    for (std::size_t c = 0; c < reg.size(); ++c)
        if (reg.at(c).kind == "heterogeneous") het_cols.push_back(c);
    std::vector<std::vector<double>> channel_values(het_cols.size());
    std::vector<std::vector<double>> channel_target(het_cols.size());

    std::ostringstream csv;
    csv << "series_id,phase,token_index,covariate_index,weight\n";
    auto dump = [&](const std::string& id, const char* phase, const Tensor& w) {
        for (std::size_t p = 0; p < w.rows(); ++p)
            for (std::size_t m = 0; m < w.cols(); ++m)
                csv << id << ',' << phase << ',' << p << ',' << m << ',' << format_number(w.at(p, m)) << '\n';
    };
    for (const auto& [series, win] : last) {
        const WindowData w = make_window(data.prepared, win);
        AdapterTrace trace;
        adapter.forecast(backbone, w, &trace);
        if (trace.pre_weights.size() > 0) dump(w.series_id, "past", trace.pre_weights);
        if (trace.post_weights.size() > 0) dump(w.series_id, "future", trace.post_weights);
        for (std::size_t i = 0; i < het_cols.size(); ++i) {
            const std::size_t c = het_cols[i];
            if (c < reg.m_known()) {
                for (std::size_t t = 0; t < T + H; ++t) {
                    channel_values[i].push_back(trace.known_channels.at(t, c));
                    channel_target[i].push_back(t < T ? w.history[t] : w.future[t - T]);
                }
            } else {
                for (std::size_t t = 0; t < T; ++t) {
                    channel_values[i].push_back(trace.past_channels.at(t, c - reg.m_known()));
                    channel_target[i].push_back(w.history[t]);
                }
            }
        }
    }

    Json channels = Json::array();
    for (std::size_t i = 0; i < het_cols.size(); ++i) {
        const auto& info = reg.at(het_cols[i]);
        const Correlation corr = pearson(channel_values[i], channel_target[i]);
        channels.push_back(Json{{"covariate_index", het_cols[i]},
                                {"source", info.source},
                                {"sub", info.sub},
                                {"rho", corr.degenerate ? Json(nullptr) : Json(corr.rho)},
                                {"degenerate", corr.degenerate}});
    }

    prepare_out(opts);
    write_text_file(opts.out / "attention.csv", csv.str());
    write_json_file(opts.out / "correlation.json",
                    Json{{"windows", last.size()}, {"registry", reg.to_json()}, {"channels", channels}});
    write_resolved(opts, "attn-dump",
                   Json{{"data", data_path},
                        {"backbone", backbone_path},
                        {"adapter", adapter_path},
                        {"split", to_string(split_mode)},
                        {"test_fraction", test_fraction},
                        {"windows", which}});
}

void cmd_seed_sweep(const Options& opts) {
    const Json j = read_json_file(opts.config);
    ConfigReader r(j, "seed-sweep config");
    Experiment e = read_experiment(r, opts);
    auto seeds = r.get<std::vector<std::uint64_t>>("seeds", {41, 42, 43, 44, 45});
    r.finish();
    if (seeds.empty()) throw ConfigError("seed-sweep config field 'seeds' must not be empty");
    if (opts.seed)
        for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = *opts.seed + i;

    Loaded l = load_experiment(e);
    AblationInput in;
    in.data = &l.data;
    in.backbone = &l.backbone;
    in.train = e.train;
    in.aggregation = e.aggregation;
    const auto summary = seed_sweep(
        [&](std::uint64_t s) {
            AblationInput arm = in;
            arm.seed = s;
            const ArmResult res = run_adapter_arm("unica", arm, e.fusion);
            std::map<std::string, double> out;
            for (const auto& [name, entry] : res.report.metrics)
                out[name] = entry.defined() ? entry.normalized : std::nan("");
            out["average_normalized"] = res.report.average_defined ? res.report.average_normalized : std::nan("");
            out["val_loss"] = res.val_loss;
            return out;
        },
        seeds);

    prepare_out(opts);
    write_json_file(opts.out / "sweep.json", sweep_to_json(summary, seeds));
    Json resolved = e.to_json();
    resolved.erase("seed");
    resolved["seeds"] = seeds;
    write_resolved(opts, "seed-sweep", resolved);
}

namespace {

int exit_code(const std::exception& e) {
    if (dynamic_cast<const CompatibilityError*>(&e)) return 3;
    if (dynamic_cast<const NumericError*>(&e)) return 4;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e)) return 2;
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
    return 1;
}

const char* const kAblateHelp =
    "Ablation mode, one of:\n"
    "  fusion_pos     past/future fusion positions (pre-pre, post-pre, post-post, pre-post)\n"
    "  homogenizer    linear vs MLP homogenizer\n"
    "  dhet_sweep     homogenized width d_het in {1, 2, 4, 8, 16}\n"
    "  gate_zero      zero-shot vs all gates zeroed vs trained adapter\n"
    "  noise          clean vs one injected standard-normal covariate, with the delta\n"
    "  weight_fusion  linear weight-fusion baseline vs attention fusion\n"
    "  static_toggle  static context on vs off\n"
    "  sft            full fine-tuning of the backbone vs adapter";

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Covariate adaptation for a frozen forecasting backbone.\n"
                 "Exit codes: 0 success, 2 input or config error, 3 incompatible artifacts, "
                 "4 numeric or training failure, 1 internal error."};
    app.require_subcommand(1);
    std::string config, out, mechanism, mode;
    std::uint64_t seed = kDefaultSeed;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON config file")->required();
        sub->add_option("--out", out, "Output directory")->required();
        sub->add_option("--seed", seed, "Seed overriding every seed in the config (default 42)");
    };
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset (dataset.json)");
    auto* pre = app.add_subcommand("pretrain", "Pretrain the toy backbone on a corpus (backbone.json)");
    auto* adapt = app.add_subcommand("adapt", "Train the covariate adapter on a frozen backbone (adapter.json, telemetry.json)");
    auto* fc = app.add_subcommand("forecast", "Write quantile forecasts for the test or validation windows (forecasts.json)");
    auto* ev = app.add_subcommand("eval", "Score forecasts and normalise each metric by Naive (report.json)");
    auto* abl = app.add_subcommand("ablate", "Run one ablation and tabulate every arm (ablation.json, ablation.csv)");
    auto* attn = app.add_subcommand("attn-dump", "Dump fusion attention weights and homogenized-channel correlations");
    auto* sweep = app.add_subcommand("seed-sweep", "Repeat adapter training over several seeds (sweep.json)");
    for (auto* sub : {synth, pre, adapt, fc, ev, abl, attn, sweep}) common(sub);
    adapt->add_option("--mechanism", mechanism, "Override the fusion mechanism: unica, weight_fusion or gate_zero");
    abl->add_option("--mode", mode, kAblateHelp);
    sweep->footer("--seed S replaces the configured seeds with S, S+1, ...");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    Options opts;
    opts.config = config;
    opts.out = out;
    for (auto* sub : {synth, pre, adapt, fc, ev, abl, attn, sweep})
        if (sub->parsed() && sub->count("--seed") > 0) opts.seed = seed;

    try {
        if (synth->parsed()) cmd_synth(opts);
        else if (pre->parsed()) cmd_pretrain(opts);
        else if (adapt->parsed())
            cmd_adapt(opts, adapt->count("--mechanism") ? std::optional<std::string>(mechanism) : std::nullopt);
        else if (fc->parsed()) cmd_forecast(opts);
        else if (ev->parsed()) cmd_eval(opts);
        else if (abl->parsed()) cmd_ablate(opts, abl->count("--mode") ? std::optional<std::string>(mode) : std::nullopt);
        else if (attn->parsed()) cmd_attn_dump(opts);
        else if (sweep->parsed()) cmd_seed_sweep(opts);
    } catch (const std::exception& e) {
        std::cerr << "unica: error: " << e.what() << '\n';
        return exit_code(e);
    }
    return 0;
}

}  // namespace unica::cli
