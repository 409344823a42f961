#include "unica/training.hpp"

#include <cmath>

#include "unica/errors.hpp"

namespace unica {
namespace {

std::vector<double> normalized_future(const WindowData& w, const Normalized& nz) {
    std::vector<double> y(w.future.size());
    for (std::size_t h = 0; h < y.size(); ++h) y[h] = (w.future[h] - nz.mu) / nz.sigma;
    return y;
}

double pinball_mean(const Tensor& q, const std::vector<double>& y, const std::vector<double>& levels) {
    const std::size_t K = levels.size();
    double total = 0.0;
    for (std::size_t h = 0; h < y.size(); ++h)
        for (std::size_t k = 0; k < K; ++k) {
            const double e = y[h] - q[h * K + k];
            total += (levels[k] - (e < 0.0 ? 1.0 : 0.0)) * e;
        }
    return total / static_cast<double>(y.size() * K);
}

using ForwardFn = std::function<Var(Tape&, const WindowData&, Normalized&)>;

double evaluate_with(const ForwardFn& fwd, const std::vector<WindowData>& windows, const std::vector<double>& levels) {
    if (windows.empty()) return 0.0;
    double total = 0.0;
    for (const auto& w : windows) {
        Tape t(false);
        Normalized nz;
        const Tensor q = finalize_quantiles(fwd(t, w, nz).value(), 0.0, 1.0);
        total += pinball_mean(q, normalized_future(w, nz), levels);
    }
    return total / static_cast<double>(windows.size());
}

TrainTelemetry fit(const PreparedDataset& pd, const Splits& splits, const std::vector<Parameter*>& params,
                   const ForwardFn& fwd, const BackboneConfig& bcfg, const TrainConfig& cfg) {
    cfg.validate();
    if (splits.train.empty()) throw DataError("training: no training windows");
    std::vector<WindowData> val;
    val.reserve(splits.val.size());
    for (const auto& w : splits.val) val.push_back(make_window(pd, w));
    const bool monitor_val = !val.empty();
    // Without validation windows the monitored value is the epoch's training loss.

    TrainTelemetry tel;
    tel.monitored_validation = monitor_val;
    auto snapshot = [&] {
        std::vector<Tensor> s;
        s.reserve(params.size());
        for (const auto* p : params) s.push_back(p->value);
        return s;
    };
    std::vector<Tensor> best = snapshot();
    auto guarded_eval = [&](const std::string& when) {
        try {
            const double v = evaluate_with(fwd, val, bcfg.levels);
            if (std::isfinite(v)) return v;
        } catch (const TrainingError&) {
            throw;
        } catch (const NumericError& e) {
            throw TrainingError("training diverged: " + std::string(e.what()) + " in validation " + when);
        }
        throw TrainingError("training diverged: non-finite validation loss " + when);
    };
    const double init_val = monitor_val ? guarded_eval("at initialisation") : std::numeric_limits<double>::infinity();
    tel.initial_val_loss = monitor_val ? init_val : 0.0;
    tel.best_val_loss = init_val;

    Adam adam(params);
    ReduceLROnPlateau sched(cfg.learning_rate, cfg.scheduler_patience, cfg.scheduler_factor);
    EarlyStopping stopper(cfg.early_stop_patience);
    stopper.update(init_val);
    Rng rng(derive_seed(cfg.seed, "batches"));
    const std::size_t median = bcfg.median_index();
    double lr = cfg.learning_rate;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double train_sum = 0.0;
        for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) try {
            for (auto* p : params) p->zero_grad();
            Tape tape;
            Var total;
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                const WindowData w = make_window(pd, splits.train[rng.index(splits.train.size())]);
                Normalized nz;
                Var q = fwd(tape, w, nz);
                const auto y = normalized_future(w, nz);
                Var l = cfg.loss == LossKind::quantile ? ops::quantile_loss(q, y, bcfg.levels)
                                                       : ops::huber_loss(ops::slice_cols(q, median, 1), y);
                total = total.valid() ? ops::add(total, l) : l;
            }
            Var loss = ops::scale(total, 1.0 / static_cast<double>(cfg.batch_size));
            const double lv = loss.value().item();
            if (!std::isfinite(lv))
                throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step + 1));
            train_sum += lv;
            tape.backward(loss);
            adam.step(lr, cfg.weight_decay);
            ++tel.steps;
        } catch (const TrainingError&) {
            throw;
        } catch (const NumericError& e) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                                ": " + e.what());
        }
        const double train_loss = train_sum / static_cast<double>(cfg.steps_per_epoch);
        const double monitored = monitor_val ? guarded_eval("at epoch " + std::to_string(epoch)) : train_loss;
        const bool improved = stopper.update(monitored);
        if (improved) {
            best = snapshot();
            tel.best_val_loss = monitored;
            tel.best_epoch = epoch;
        }
        tel.epochs.push_back({epoch, train_loss, monitored, lr, improved});
        lr = sched.step(monitored);
        if (stopper.should_stop()) {
            tel.early_stopped = true;
            break;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    return tel;
}

}  // namespace

std::string to_string(LossKind k) { return k == LossKind::quantile ? "quantile" : "huber"; }

LossKind parse_loss(std::string_view s) {
    if (s == "quantile") return LossKind::quantile;
    if (s == "huber") return LossKind::huber;
    throw ConfigError("unknown loss '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train config: learning_rate must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("train config: weight_decay must be non-negative");
    if (batch_size == 0 || max_epochs == 0 || steps_per_epoch == 0 || scheduler_patience == 0 || early_stop_patience == 0)
        throw ConfigError("train config: batch_size, max_epochs, steps_per_epoch and patiences must be positive");
    if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) throw ConfigError("train config: scheduler_factor must lie in (0, 1)");
}

Json to_json(const TrainConfig& c) {
    return Json{{"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"steps_per_epoch", c.steps_per_epoch},
                {"scheduler_patience", c.scheduler_patience},
                {"scheduler_factor", c.scheduler_factor},
                {"early_stop_patience", c.early_stop_patience},
                {"loss", to_string(c.loss)},
                {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    TrainConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "learning_rate") c.learning_rate = v.get<double>();
            else if (key == "weight_decay") c.weight_decay = v.get<double>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "max_epochs") c.max_epochs = v.get<std::size_t>();
            else if (key == "steps_per_epoch") c.steps_per_epoch = v.get<std::size_t>();
            else if (key == "scheduler_patience") c.scheduler_patience = v.get<std::size_t>();
            else if (key == "scheduler_factor") c.scheduler_factor = v.get<double>();
            else if (key == "early_stop_patience") c.early_stop_patience = v.get<std::size_t>();
            else if (key == "loss") c.loss = parse_loss(v.get<std::string>());
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw ConfigError("train config: unknown field '" + key + "'");
        } catch (const Json::exception& e) {
            throw ConfigError("train config field '" + key + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

Json TrainTelemetry::to_json() const {
    Json ep = Json::array();
    for (const auto& e : epochs)
        ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}, {"improved", e.improved}});
    return Json{{"epochs", ep},
                {"initial_val_loss", initial_val_loss},
                {"best_val_loss", std::isfinite(best_val_loss) ? Json(best_val_loss) : Json(nullptr)},
                {"best_epoch", best_epoch},
                {"steps", steps},
                {"early_stopped", early_stopped},
                {"monitored_validation", monitored_validation},
                {"backbone_hash_before", backbone_hash_before},
                {"backbone_hash_after", backbone_hash_after}};
}

double evaluate_loss(Adapter* adapter, Backbone& backbone, const PreparedDataset& pd, const std::vector<Window>& windows) {
    std::vector<WindowData> data;
    data.reserve(windows.size());
    for (const auto& w : windows) data.push_back(make_window(pd, w));
    ForwardFn fwd = [&](Tape& t, const WindowData& w, Normalized& nz) {
        if (adapter) return adapter->forward(t, backbone, w, &nz);
        nz = instance_normalize(w.history);
        return backbone.predict(t, backbone.encode(t, backbone.tokenize_series(t, w.history, w.history_observed)));
    };
    return evaluate_with(fwd, data, backbone.config().levels);
}

AdapterRun train_adapter(const PreparedDataset& pd, const Splits& splits, Backbone& backbone, Adapter adapter,
                         const TrainConfig& cfg) {
    if (!backbone.frozen()) throw ContractError("train_adapter: backbone must be frozen");
    AdapterRun run{std::move(adapter), {}};
    const std::string before = backbone.content_hash();
    ForwardFn fwd = [&](Tape& t, const WindowData& w, Normalized& nz) { return run.adapter.forward(t, backbone, w, &nz); };
    run.telemetry = fit(pd, splits, run.adapter.parameters(), fwd, backbone.config(), cfg);
    run.telemetry.backbone_hash_before = before;
    run.telemetry.backbone_hash_after = backbone.content_hash();
    if (run.telemetry.backbone_hash_after != backbone.frozen_hash())
        throw TrainingError("train_adapter: frozen backbone was modified during training");
    return run;
}

SftRun train_sft(const PreparedDataset& pd, const Splits& splits, const Backbone& base, const TrainConfig& cfg) {
    SftRun run{base, {}};
    run.backbone.unfreeze();
    const std::string before = run.backbone.content_hash();
    Backbone& b = run.backbone;
    ForwardFn fwd = [&](Tape& t, const WindowData& w, Normalized& nz) {
        nz = instance_normalize(w.history);
        return b.predict(t, b.encode(t, b.tokenize_series(t, w.history, w.history_observed)));
    };
    run.telemetry = fit(pd, splits, b.parameters(), fwd, b.config(), cfg);
    run.telemetry.backbone_hash_before = before;
    run.telemetry.backbone_hash_after = b.content_hash();
    return run;
}

std::map<std::string, MetricSummary> seed_sweep(const SweepRun& run, const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ConfigError("seed_sweep: no seeds");
    std::map<std::string, MetricSummary> out;
    for (auto seed : seeds)
        for (const auto& [name, value] : run(seed)) out[name].values.push_back(value);
    for (auto& [name, s] : out) {
        if (s.values.size() != seeds.size()) throw ContractError("seed_sweep: metric '" + name + "' missing for some seeds");
        const double n = static_cast<double>(s.values.size());
        double mean = 0.0;
        for (double v : s.values) mean += v;
        mean /= n;
        double ss = 0.0;
        for (double v : s.values) ss += (v - mean) * (v - mean);
        s.mean = mean;
        s.std = s.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    return out;
}

Json sweep_to_json(const std::map<std::string, MetricSummary>& report, const std::vector<std::uint64_t>& seeds) {
    Json metrics = Json::object();
    for (const auto& [name, s] : report) metrics[name] = {{"mean", s.mean}, {"std", s.std}, {"values", s.values}};
    return Json{{"seeds", seeds}, {"metrics", metrics}};
}

}  // namespace unica
