#include "unica/metrics.hpp"

#include <cmath>

#include "unica/errors.hpp"

namespace unica {
namespace {

double pinball(double alpha, double q, double y) { return (alpha - (y < q ? 1.0 : 0.0)) * (y - q); }

std::map<std::string, MetricEntry> pooled_metrics(const std::vector<EvalFrame>& frames, const std::vector<double>& levels) {
    const PointMetrics pm = point_metrics(frames, levels);
    const Score c = crps(frames, levels);
    std::map<std::string, MetricEntry> out;
    auto put = [&](const std::string& name, const Score& s) {
        MetricEntry e;
        e.raw = s.defined ? s.value : 0.0;
        if (!s.defined) e.flags.push_back("undefined");
        out[name] = e;
    };
    put("MAE", pm.mae);
    put("MSE", pm.mse);
    put("MAPE", pm.mape);
    put("CRPS", c);
    if (pm.mape_excluded > 0) out["MAPE"].flags.push_back("zero_truth_excluded:" + std::to_string(pm.mape_excluded));
    return out;
}

bool has_flag(const MetricEntry& e, std::string_view f) {
    for (const auto& x : e.flags)
        if (x == f) return true;
    return false;
}

}  // namespace

void check_frames(const std::vector<EvalFrame>& frames, const std::vector<double>& levels) {
    if (frames.empty()) throw ContractError("metrics: no frames");
    for (const auto& f : frames) {
        if (f.quantiles.rank() != 2 || f.quantiles.rows() != f.y.size() || f.quantiles.cols() != levels.size())
            throw ContractError("metrics: frame '" + f.series_id + "' at origin " + std::to_string(f.origin) +
                                " has quantiles that do not match [H, K]");
    }
}

std::size_t median_level(const std::vector<double>& levels) {
    for (std::size_t k = 0; k < levels.size(); ++k)
        if (levels[k] == 0.5) return k;
    throw ContractError("metrics: levels must include 0.5");
}

PointMetrics point_metrics(const std::vector<EvalFrame>& frames, const std::vector<double>& levels) {
    check_frames(frames, levels);
    const std::size_t m = median_level(levels);
    double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
    std::size_t n = 0, n_pct = 0;
    PointMetrics pm;
    for (const auto& f : frames)
        for (std::size_t h = 0; h < f.y.size(); ++h) {
            const double e = f.y[h] - f.quantiles.at(h, m);
            abs_sum += std::abs(e);
            sq_sum += e * e;
            ++n;
            if (f.y[h] == 0.0) {
                ++pm.mape_excluded;
            } else {
                pct_sum += std::abs(e / f.y[h]);
                ++n_pct;
            }
        }
    if (n == 0) throw ContractError("metrics: frames have an empty horizon");
    pm.mae = {abs_sum / static_cast<double>(n), true};
    pm.mse = {sq_sum / static_cast<double>(n), true};
    pm.mape = n_pct > 0 ? Score{pct_sum / static_cast<double>(n_pct), true} : Score{0.0, false};
    return pm;
}

Score wql(const std::vector<EvalFrame>& frames, const std::vector<double>& levels, std::size_t level_index) {
    check_frames(frames, levels);
    if (level_index >= levels.size()) throw ContractError("wql: level index out of range");
    const double alpha = levels[level_index];
    double num = 0.0, den = 0.0;
    for (const auto& f : frames)
        for (std::size_t h = 0; h < f.y.size(); ++h) {
            num += pinball(alpha, f.quantiles.at(h, level_index), f.y[h]);
            den += std::abs(f.y[h]);
        }
    if (den == 0.0) return {0.0, false};
    return {2.0 * num / den, true};
}

Score crps(const std::vector<EvalFrame>& frames, const std::vector<double>& levels) {
    check_frames(frames, levels);
    double sum = 0.0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const Score s = wql(frames, levels, k);
        if (!s.defined) return {0.0, false};
        sum += s.value;
    }
    return {sum / static_cast<double>(levels.size()), true};
}

Tensor naive_forecast(const std::vector<double>& context, std::size_t horizon, std::size_t levels) {
    if (context.empty()) throw ContractError("naive_forecast: empty context");
    return Tensor({horizon, levels}, context.back());
}

EvalFrame naive_frame(const WindowData& w, std::size_t levels) {
    std::vector<double> ctx;
    for (std::size_t i = 0; i < w.history.size(); ++i)
        if (w.history_observed[i] > 0.5) ctx.push_back(w.history[i]);
    if (ctx.empty()) ctx = w.history;
    return {w.series_id, w.origin, w.future, naive_forecast(ctx, w.future.size(), levels)};
}

std::string to_string(Aggregation a) { return a == Aggregation::pooled ? "pooled" : "per_series"; }

Aggregation parse_aggregation(std::string_view s) {
    if (s == "pooled") return Aggregation::pooled;
    if (s == "per_series") return Aggregation::per_series;
    throw ConfigError("unknown aggregation '" + std::string(s) + "'");
}

bool MetricEntry::defined() const { return !has_flag(*this, "undefined"); }

std::map<std::string, MetricEntry> raw_metrics(const std::vector<EvalFrame>& frames, const std::vector<double>& levels,
                                               Aggregation agg) {
    if (agg == Aggregation::pooled) return pooled_metrics(frames, levels);
    check_frames(frames, levels);
    std::map<std::string, std::vector<EvalFrame>> groups;
    for (const auto& f : frames) groups[f.series_id].push_back(f);
    std::map<std::string, MetricEntry> out;
    std::map<std::string, std::size_t> counts;
    std::size_t excluded = 0;
    for (const auto& [id, g] : groups) {
        for (const auto& [name, e] : pooled_metrics(g, levels)) {
            auto& acc = out[name];
            if (e.defined()) {
                acc.raw += e.raw;
                ++counts[name];
            }
            if (name == "MAPE") excluded += point_metrics(g, levels).mape_excluded;
        }
    }
    for (auto& [name, e] : out) {
        if (counts[name] == 0) {
            e.raw = 0.0;
            e.flags.push_back("undefined");
        } else {
            e.raw /= static_cast<double>(counts[name]);
            if (counts[name] < groups.size()) e.flags.push_back("undefined_series:" + std::to_string(groups.size() - counts[name]));
        }
    }
    if (excluded > 0) out["MAPE"].flags.push_back("zero_truth_excluded:" + std::to_string(excluded));
    return out;
}

MetricReport normalize_by_naive(std::string dataset, std::string method, const std::vector<EvalFrame>& frames,
                                const std::vector<EvalFrame>& naive, const std::vector<double>& levels, Aggregation agg) {
    if (frames.size() != naive.size()) throw ContractError("normalize_by_naive: Naive frames must cover the same windows");
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (frames[i].series_id != naive[i].series_id || frames[i].origin != naive[i].origin || frames[i].y != naive[i].y)
            throw ContractError("normalize_by_naive: Naive frames must cover the same windows");
    MetricReport r;
    r.dataset = std::move(dataset);
    r.method = std::move(method);
    r.aggregation = agg;
    const auto raw = raw_metrics(frames, levels, agg);
    const auto base = raw_metrics(naive, levels, agg);
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& [name, e] : raw) {
        MetricEntry out = e;
        const MetricEntry& b = base.at(name);
        out.naive = b.raw;
        if (!e.defined() || !b.defined()) {
            if (!b.defined()) out.flags.push_back("naive_undefined");
            if (!has_flag(out, "undefined")) out.flags.push_back("undefined");
        } else if (b.raw == 0.0) {
            out.flags.push_back("naive_zero");
            out.flags.push_back("undefined");
        } else {
            out.normalized = e.raw / b.raw;
            sum += out.normalized;
            ++defined;
        }
        r.metrics[name] = out;
    }
    r.average_defined = defined > 0;
    r.average_normalized = defined > 0 ? sum / static_cast<double>(defined) : 0.0;
    return r;
}

Json MetricReport::to_json() const {
    Json m = Json::object();
    for (const auto& [name, e] : metrics) {
        const bool ok = e.defined();
        m[name] = {{"raw", e.raw}, {"naive", e.naive}, {"normalized", ok ? Json(e.normalized) : Json(nullptr)}, {"flags", e.flags}};
    }
    return Json{{"dataset", dataset},
                {"method", method},
                {"aggregation", to_string(aggregation)},
                {"metrics", m},
                {"average_normalized", average_defined ? Json(average_normalized) : Json(nullptr)}};
}

Correlation pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw ContractError("pearson: inputs must have equal length >= 2");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return {0.0, true};
    return {sab / std::sqrt(saa * sbb), false};
}

std::vector<Correlation> channel_target_correlation(const Tensor& channels, const std::vector<double>& target) {
    if (channels.rank() != 2 || channels.rows() != target.size())
        throw ContractError("channel_target_correlation: channels must be [n, c] with n = target length");
    std::vector<Correlation> out;
    std::vector<double> col(channels.rows());
    for (std::size_t c = 0; c < channels.cols(); ++c) {
        for (std::size_t r = 0; r < channels.rows(); ++r) col[r] = channels.at(r, c);
        out.push_back(pearson(col, target));
    }
    return out;
}

}  // namespace unica
