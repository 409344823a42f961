#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "unica/errors.hpp"
#include "unica/rng.hpp"
#include "unica/synthetic.hpp"

namespace unica::cli {
namespace {

const char* const kMetricOrder[] = {"MAE", "MSE", "MAPE", "CRPS"};

MetricReport score(const AblationInput& in, const DataBundle& data, const std::string& method,
                   const std::vector<EvalFrame>& frames) {
    const auto& levels = in.backbone->config().levels;
    const auto naive = naive_frames(data.prepared, data.splits.test, levels.size());
    return normalize_by_naive(data.name, method, frames, naive, levels, in.aggregation);
}

TrainConfig seeded(TrainConfig c, std::uint64_t seed) {
    c.seed = seed;
    return c;
}

Json nullable(double v, bool defined) { return defined && std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

DataBundle make_bundle(std::string name, Dataset ds, SplitMode mode, double test_fraction) {
    DataBundle b;
    b.name = std::move(name);
    b.prepared = prepare(ds);
    b.splits = split(b.prepared, mode, test_fraction);
    b.dataset = std::move(ds);
    return b;
}

void check_compatible(const Dataset& ds, const Backbone& backbone) {
    const auto& c = backbone.config();
    if (ds.context != c.context || ds.horizon != c.horizon)
        throw CompatibilityError("dataset context/horizon " + std::to_string(ds.context) + "/" +
                                 std::to_string(ds.horizon) + " differ from the backbone's " +
                                 std::to_string(c.context) + "/" + std::to_string(c.horizon));
}

void check_compatible(const Schema& schema, const Adapter& adapter) {
    if (dump_stable(to_json(schema)) != dump_stable(to_json(adapter.schema())))
        throw CompatibilityError("adapter was trained on a different covariate schema");
}

std::vector<EvalFrame> zero_shot_frames(Backbone& backbone, const PreparedDataset& pd, const std::vector<Window>& windows) {
    std::vector<EvalFrame> out;
    out.reserve(windows.size());
    for (const auto& win : windows) {
        const WindowData w = make_window(pd, win);
        out.push_back(EvalFrame{w.series_id, w.origin, w.future, backbone.forecast(w.history, w.history_observed)});
    }
    return out;
}

std::vector<EvalFrame> adapter_frames(Adapter& adapter, Backbone& backbone, const PreparedDataset& pd,
                                      const std::vector<Window>& windows) {
    std::vector<EvalFrame> out;
    out.reserve(windows.size());
    for (const auto& win : windows) {
        const WindowData w = make_window(pd, win);
        out.push_back(EvalFrame{w.series_id, w.origin, w.future, adapter.forecast(backbone, w)});
    }
    return out;
}

std::vector<EvalFrame> naive_frames(const PreparedDataset& pd, const std::vector<Window>& windows, std::size_t levels) {
    std::vector<EvalFrame> out;
    out.reserve(windows.size());
    for (const auto& win : windows) out.push_back(naive_frame(make_window(pd, win), levels));
    return out;
}

ArmResult run_zero_shot_arm(const std::string& arm, const AblationInput& in) {
    const DataBundle& data = *in.data;
    ArmResult r;
    r.arm = arm;
    r.report = score(in, data, "zero_shot", zero_shot_frames(*in.backbone, data.prepared, data.splits.test));
    r.val_loss = data.splits.val.empty() ? std::nan("") : evaluate_loss(nullptr, *in.backbone, data.prepared, data.splits.val);
    return r;
}

ArmResult run_adapter_arm(const std::string& arm, const AblationInput& in, const FusionConfig& fusion,
                          const DataBundle* data) {
    const DataBundle& d = data ? *data : *in.data;
    Adapter fresh(d.dataset.schema, in.backbone->config(), fusion, in.seed);
    auto run = train_adapter(d.prepared, d.splits, *in.backbone, std::move(fresh), seeded(in.train, in.seed));
    ArmResult r;
    r.arm = arm;
    r.report = score(in, d, to_string(fusion.mechanism),
                     adapter_frames(run.adapter, *in.backbone, d.prepared, d.splits.test));
    r.val_loss = run.telemetry.best_val_loss;
    r.epochs = run.telemetry.epochs.size();
    r.early_stopped = run.telemetry.early_stopped;
    return r;
}

ArmResult run_sft_arm(const std::string& arm, const AblationInput& in) {
    const DataBundle& data = *in.data;
    auto run = train_sft(data.prepared, data.splits, *in.backbone, seeded(in.train, in.seed));
    ArmResult r;
    r.arm = arm;
    r.report = score(in, data, "sft", zero_shot_frames(run.backbone, data.prepared, data.splits.test));
    r.val_loss = run.telemetry.best_val_loss;
    r.epochs = run.telemetry.epochs.size();
    r.early_stopped = run.telemetry.early_stopped;
    return r;
}

std::vector<std::string> ablation_modes() {
    return {"fusion_pos", "homogenizer", "dhet_sweep", "gate_zero", "noise", "weight_fusion", "static_toggle", "sft"};
}

void check_ablation_mode(const std::string& mode) {
    const auto modes = ablation_modes();
    if (std::find(modes.begin(), modes.end(), mode) != modes.end()) return;
    std::string known;
    for (const auto& m : modes) known += (known.empty() ? "" : ", ") + m;
    throw ConfigError("unknown ablation mode '" + mode + "' (expected one of " + known + ")");
}

AblationResult run_ablation(const std::string& mode, const AblationInput& in) {
    AblationResult out;
    out.mode = mode;
    const FusionConfig base = in.fusion;
    if (mode == "fusion_pos") {
        const std::pair<Position, Position> arms[] = {{Position::pre, Position::pre},
                                                      {Position::post, Position::pre},
                                                      {Position::post, Position::post},
                                                      {Position::pre, Position::post}};
        for (const auto& [past, future] : arms) {
            FusionConfig f = base;
            f.past_position = past;
            f.future_position = future;
            out.arms.push_back(run_adapter_arm(to_string(past) + "-" + to_string(future), in, f));
        }
    } else if (mode == "homogenizer") {
        for (const auto kind : {HomogenizerKind::linear, HomogenizerKind::mlp}) {
            FusionConfig f = base;
            f.homogenizer = kind;
            out.arms.push_back(run_adapter_arm(to_string(kind), in, f));
        }
    } else if (mode == "dhet_sweep") {
        for (const std::size_t d : {1, 2, 4, 8, 16}) {
            FusionConfig f = base;
            f.d_het = d;
            out.arms.push_back(run_adapter_arm("d_het=" + std::to_string(d), in, f));
        }
    } else if (mode == "gate_zero") {
        out.arms.push_back(run_zero_shot_arm("zero_shot", in));
        FusionConfig f = base;
        f.mechanism = Mechanism::gate_zero;
        out.arms.push_back(run_adapter_arm("gate_zero", in, f));
        f.mechanism = Mechanism::unica;
        out.arms.push_back(run_adapter_arm("unica", in, f));
    } else if (mode == "noise") {
        out.arms.push_back(run_adapter_arm("clean", in, base));
        const DataBundle& clean = *in.data;
        DataBundle noisy;
        noisy.name = clean.name;
        noisy.dataset = inject_noise_covariate(clean.dataset, derive_seed(in.seed, "noise"));
        noisy.prepared = prepare(noisy.dataset);
        noisy.splits = clean.splits;
        out.arms.push_back(run_adapter_arm("noisy", in, base, &noisy));
        out.arms.back().report.method = "unica+noise";
        const double c = out.arms[0].report.average_normalized;
        const double n = out.arms[1].report.average_normalized;
        if (out.arms[0].report.average_defined && out.arms[1].report.average_defined) {
            out.delta = n - c;
            if (c != 0.0) out.relative_delta = (n - c) / c;
        }
    } else if (mode == "weight_fusion") {
        out.arms.push_back(run_zero_shot_arm("zero_shot", in));
        FusionConfig f = base;
        f.mechanism = Mechanism::weight_fusion;
        out.arms.push_back(run_adapter_arm("weight_fusion", in, f));
        f.mechanism = Mechanism::unica;
        out.arms.push_back(run_adapter_arm("unica", in, f));
    } else if (mode == "static_toggle") {
        for (const bool s : {true, false}) {
            FusionConfig f = base;
            f.use_static = s;
            out.arms.push_back(run_adapter_arm(s ? "with_static" : "without_static", in, f));
        }
    } else if (mode == "sft") {
        out.arms.push_back(run_zero_shot_arm("zero_shot", in));
        out.arms.push_back(run_sft_arm("sft", in));
        out.arms.push_back(run_adapter_arm("unica", in, base));
    } else {
        check_ablation_mode(mode);
    }
    return out;
}

Json AblationResult::to_json() const {
    Json arms_json = Json::array();
    for (const auto& a : arms) {
        Json metrics = Json::object();
        for (const char* name : kMetricOrder) {
            const auto& e = a.report.metrics.at(name);
            metrics[name] = nullable(e.normalized, e.defined());
        }
        arms_json.push_back(Json{{"arm", a.arm},
                                 {"method", a.report.method},
                                 {"normalized", metrics},
                                 {"average_normalized", nullable(a.report.average_normalized, a.report.average_defined)},
                                 {"val_loss", nullable(a.val_loss, true)},
                                 {"epochs", a.epochs},
                                 {"early_stopped", a.early_stopped},
                                 {"report", a.report.to_json()}});
    }
    Json j{{"mode", mode}, {"arms", arms_json}};
    if (delta) j["delta"] = *delta;
    if (relative_delta) j["relative_delta"] = *relative_delta;
    return j;
}

std::string AblationResult::to_csv() const {
    std::ostringstream os;
    os << "arm,MAE,MSE,MAPE,CRPS,average_normalized,val_loss,epochs\n";
    for (const auto& a : arms) {
        os << a.arm;
        for (const char* name : kMetricOrder) {
            const auto& e = a.report.metrics.at(name);
            os << ',' << (e.defined() ? format_number(e.normalized) : "");
        }
        os << ',' << (a.report.average_defined ? format_number(a.report.average_normalized) : "") << ','
           << format_number(a.val_loss) << ',' << a.epochs << '\n';
    }
    return os.str();
}

std::string format_number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace unica::cli
