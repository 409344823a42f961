// Runs acceptance criteria 1-11 and prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "adapter_gradcheck.hpp"
#include "experiment.hpp"
#include "metric_oracle.hpp"
#include "unica/adapter.hpp"
#include "unica/metrics.hpp"
#include "unica/rng.hpp"
#include "unica/synthetic.hpp"
#include "unica/training.hpp"

#ifndef UNICA_CLI
#error "UNICA_CLI must name the unica executable"
#endif

using namespace unica;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// Shared fixtures: the default backbone pretrained once, and the driver data.
struct Fixture {
    Backbone backbone;
    cli::DataBundle driver;
    std::vector<Dataset> variety;  // datasets covering every covariate kind
    TrainConfig train;
    std::optional<cli::ArmResult> zero_shot, clean;
};

Fixture& fixture() {
    static Fixture f = [] {
        Fixture x;
        x.backbone = pretrain(gen_synthetic(synthetic_preset("pretrain")), BackboneConfig{}, PretrainConfig{});
        x.backbone.freeze();
        x.driver = cli::make_bundle("driver", gen_synthetic(synthetic_preset("driver")), SplitMode::holdout, 0.1);
        for (const char* r : {"driver", "hidden_readout", "regime"}) {
            SyntheticSpec s = synthetic_preset(r);
            s.n_series = 4;
            x.variety.push_back(gen_synthetic(s));
        }
        SyntheticSpec mixed = synthetic_preset("regime");
        mixed.n_series = 4;
        mixed.known_beta = {0.5, -0.3};
        mixed.past_beta = {0.4};
        mixed.past_missing_rate = 0.1;
        mixed.het_dim = 5;
        mixed.het_scale = 0.5;
        mixed.het_future_known = false;
        x.variety.push_back(inject_noise_covariate(gen_synthetic(mixed), 99));
        x.train.max_epochs = 30;
        return x;
    }();
    return f;
}

cli::AblationInput driver_input() {
    Fixture& f = fixture();
    cli::AblationInput in;
    in.data = &f.driver;
    in.backbone = &f.backbone;
    in.train = f.train;
    in.seed = 42;
    return in;
}

const cli::ArmResult& zero_shot_arm() {
    Fixture& f = fixture();
    if (!f.zero_shot) f.zero_shot = cli::run_zero_shot_arm("zero_shot", driver_input());
    return *f.zero_shot;
}

const cli::ArmResult& clean_arm() {
    Fixture& f = fixture();
    if (!f.clean) f.clean = cli::run_adapter_arm("pre-post", driver_input(), FusionConfig{});
    return *f.clean;
}

WindowData random_window(const PreparedDataset& pd, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> s(0, pd.series.size() - 1);
    const std::size_t series = s(rng);
    std::uniform_int_distribution<std::size_t> o(pd.context, pd.series[series].length() - pd.horizon);
    return make_window(pd, Window{series, o(rng)});
}

FusionConfig random_positions(std::mt19937_64& rng) {
    FusionConfig c;
    c.past_position = rng() % 2 ? Position::pre : Position::post;
    c.future_position = rng() % 2 ? Position::pre : Position::post;
    return c;
}

Outcome gate_zero_identity() {
    Fixture& f = fixture();
    std::vector<PreparedDataset> prepared;
    for (const auto& d : f.variety) prepared.push_back(prepare(d));
    std::mt19937_64 rng(1);
    int equal = 0;
    const int n = 100;
    for (int i = 0; i < n; ++i) {
        const std::size_t d = static_cast<std::size_t>(i) % prepared.size();
        Adapter a(f.variety[d].schema, f.backbone.config(), random_positions(rng), 1000 + i);
        testing::randomize_like_init(a.parameters(), 2000 + i);
        a.apply_gate_zero();
        const WindowData w = random_window(prepared[d], rng);
        const Tensor got = a.forecast(f.backbone, w);
        const Tensor ref = f.backbone.forecast(w.history, w.history_observed);
        bool same = got.shape() == ref.shape();
        for (std::size_t k = 0; same && k < ref.size(); ++k) same = got[k] == ref[k];
        equal += same;
    }
    return {equal == n, std::to_string(equal) + "/" + std::to_string(n) + " random instances bitwise equal to the backbone"};
}

Outcome gradient_correctness() {
    const auto r = testing::run_adapter_gradcheck();
    const char* required[] = {"homogenizer", "embeddings", "affinity_grn", "value_grn", "glu", "post_attention"};
    bool pass = r.max_rel_error <= 1e-5 && r.max_abs_zero <= 1e-9 && !r.classes.count("other");
    std::string detail;
    for (const char* c : required) {
        const auto it = r.classes.find(c);
        if (it == r.classes.end()) {
            pass = false;
            detail += std::string(c) + " missing; ";
            continue;
        }
        pass = pass && it->second.max_rel_error <= 1e-5;
        detail += std::string(c) + fmt(" %.1e; ", it->second.max_rel_error);
    }
    return {pass, "max rel err per class: " + detail + fmt("structural-zero max |g| %.1e", r.max_abs_zero)};
}

Outcome frozen_backbone() {
    Fixture& f = fixture();
    const std::string file_before = dump_stable(f.backbone.to_json());
    const std::string before = f.backbone.content_hash();
    TrainConfig cfg;
    cfg.max_epochs = 4;
    cfg.steps_per_epoch = 50;
    cfg.early_stop_patience = 1000;
    auto run = train_adapter(f.driver.prepared, f.driver.splits, f.backbone,
                             Adapter(f.driver.dataset.schema, f.backbone.config(), FusionConfig{}, 7), cfg);
    const std::string after = f.backbone.content_hash();
    const bool same_file = dump_stable(f.backbone.to_json()) == file_before;
    const bool pass = run.telemetry.steps == 200 && before == after && same_file &&
                      run.telemetry.backbone_hash_before == run.telemetry.backbone_hash_after;
    return {pass, std::to_string(run.telemetry.steps) + " steps, hash " + before.substr(0, 12) +
                      (before == after ? " unchanged" : " CHANGED to " + after.substr(0, 12)) +
                      (same_file ? ", checkpoint bytes identical" : ", checkpoint bytes differ")};
}

Outcome simplex() {
    Fixture& f = fixture();
    std::vector<PreparedDataset> prepared;
    for (const auto& d : f.variety) prepared.push_back(prepare(d));
    std::mt19937_64 rng(4);
    double worst = 0.0;
    double min_weight = std::numeric_limits<double>::infinity();
    std::size_t rows = 0;
    auto check = [&](const Tensor& w) {
        if (w.size() == 0) return;
        for (std::size_t r = 0; r < w.rows(); ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < w.cols(); ++c) {
                s += w.at(r, c);
                min_weight = std::min(min_weight, w.at(r, c));
            }
            worst = std::max(worst, std::abs(s - 1.0));
            ++rows;
        }
    };
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const std::size_t d = static_cast<std::size_t>(i) % prepared.size();
        Adapter a(f.variety[d].schema, f.backbone.config(), random_positions(rng), 3000 + i);
        testing::randomize_like_init(a.parameters(), 4000 + i);
        const WindowData w = random_window(prepared[d], rng);
        AdapterTrace trace;
        a.forecast(f.backbone, w, &trace);
        check(trace.pre_weights);
        check(trace.post_weights);
        for (const auto& h : trace.fusion_attention) check(h);
        Tape t(false);
        std::vector<Tensor> enc;
        f.backbone.encode(t, f.backbone.tokenize_series(t, w.history, w.history_observed), &enc);
        for (const auto& h : enc) check(h);
    }
    const bool pass = min_weight >= 0.0 && worst <= 1e-12;
    return {pass, std::to_string(n) + " forwards, " + std::to_string(rows) +
                      fmt(" rows, max |row sum - 1| %.2e, min weight %.2e", worst, min_weight)};
}

Outcome affine_equivariance() {
    Fixture& f = fixture();
    std::vector<PreparedDataset> prepared;
    for (const auto& d : f.variety) prepared.push_back(prepare(d));
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
        const std::size_t d = static_cast<std::size_t>(i) % prepared.size();
        Adapter a(f.variety[d].schema, f.backbone.config(), random_positions(rng), 5000 + i);
        testing::randomize_like_init(a.parameters(), 6000 + i);
        const WindowData w = random_window(prepared[d], rng);
        const Tensor base = a.forecast(f.backbone, w);
        const Tensor base_zs = f.backbone.forecast(w.history, w.history_observed);
        for (const double s : {0.5, 3.0})
            for (const double b : {-2.0, 10.0}) {
                WindowData m = w;
                for (auto& v : m.history) v = s * v + b;
                const Tensor got = a.forecast(f.backbone, m);
                const Tensor got_zs = f.backbone.forecast(m.history, m.history_observed);
                for (std::size_t k = 0; k < base.size(); ++k) {
                    const double e = s * base[k] + b, ez = s * base_zs[k] + b;
                    worst = std::max(worst, std::abs(got[k] - e) / std::abs(e));
                    worst = std::max(worst, std::abs(got_zs[k] - ez) / std::abs(ez));
                }
            }
    }
    return {worst <= 1e-9, fmt("max relative deviation %.2e over 40 windows x 4 (a, b) pairs", worst)};
}

Outcome covariate_lift() {
    const auto& zs = zero_shot_arm();
    const auto& ad = clean_arm();
    const double ratio = ad.val_loss / zs.val_loss;
    const double mae_zs = zs.report.metrics.at("MAE").normalized, mae_ad = ad.report.metrics.at("MAE").normalized;
    const bool pass = ratio <= 0.7 && mae_ad < mae_zs;
    return {pass, fmt("val loss ratio %.3f (zero-shot %.4f), ", ratio, zs.val_loss) +
                      fmt("test normalized MAE %.4f vs zero-shot %.4f", mae_ad, mae_zs)};
}

Outcome noise_robustness() {
    Fixture& f = fixture();
    const auto& zs = zero_shot_arm();
    const auto& clean = clean_arm();
    // Same construction as the noise ablation mode.
    cli::DataBundle noisy;
    noisy.name = f.driver.name;
    noisy.dataset = inject_noise_covariate(f.driver.dataset, derive_seed(42, "noise"));
    noisy.prepared = prepare(noisy.dataset);
    noisy.splits = f.driver.splits;
    const auto arm = cli::run_adapter_arm("noisy", driver_input(), FusionConfig{}, &noisy);
    const double c = clean.report.average_normalized, n = arm.report.average_normalized;
    const double z = zs.report.average_normalized;
    const double rel = (n - c) / c;
    const bool pass = rel <= 0.10 && n <= z * 1.05;
    return {pass, fmt("average normalized clean %.4f, noisy %.4f, zero-shot %.4f", c, n, z) +
                      fmt(", relative degradation %+.2f%%", 100.0 * rel)};
}

Outcome metric_oracle() {
    std::mt19937_64 rng(8);
    double worst = 0.0;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    int sets = 0;
    while (sets < 100) {
        const auto frames = testing::random_frames(rng);
        const testing::Oracle o(frames);
        double den = 0.0;
        for (double y : o.y) den += std::abs(y);
        if (den == 0.0) continue;
        ++sets;
        for (std::size_t k = 0; k < testing::kLevels.size(); ++k)
            worst = std::max(worst, rel(wql(frames, testing::kLevels, k).value, o.wql(k)));
        worst = std::max(worst, rel(crps(frames, testing::kLevels).value, o.crps()));
        const PointMetrics pm = point_metrics(frames, testing::kLevels);
        worst = std::max({worst, rel(pm.mae.value, o.mae()), rel(pm.mse.value, o.mse())});
        if (pm.mape.defined) worst = std::max(worst, rel(pm.mape.value, o.mape()));
    }
    Fixture& f = fixture();
    const auto naive = cli::naive_frames(f.driver.prepared, f.driver.splits.test, f.backbone.config().num_levels());
    const MetricReport self = normalize_by_naive("driver", "naive", naive, naive, f.backbone.config().levels);
    bool ones = self.average_defined && self.average_normalized == 1.0;
    for (const auto& [name, e] : self.metrics) ones = ones && e.defined() && e.normalized == 1.0;
    return {worst <= 1e-12 && ones,
            fmt("max relative error %.2e over 100 frame sets; Naive self-normalisation ", worst) +
                (ones ? "exactly 1.0" : "NOT 1.0")};
}

// Pearson correlation between y and its least-squares fit on [1, X].
double best_linear_rho(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    const std::size_t p = X.empty() ? 1 : X[0].size() + 1;
    std::vector<std::vector<long double>> A(p, std::vector<long double>(p + 1, 0.0L));
    for (std::size_t i = 0; i < y.size(); ++i) {
        std::vector<long double> row{1.0L};
        for (double v : X[i]) row.push_back(v);
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) A[a][b] += row[a] * row[b];
            A[a][p] += row[a] * y[i];
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
        std::swap(A[c], A[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c || A[c][c] == 0.0L) continue;
            const long double m = A[r][c] / A[c][c];
            for (std::size_t k = c; k <= p; ++k) A[r][k] -= m * A[c][k];
        }
    }
    std::vector<double> beta(p);
    for (std::size_t c = 0; c < p; ++c) beta[c] = A[c][c] == 0.0L ? 0.0 : static_cast<double>(A[c][p] / A[c][c]);
    std::vector<double> fit(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        double s = beta[0];
        for (std::size_t j = 0; j + 1 < p; ++j) s += beta[j + 1] * X[i][j];
        fit[i] = s;
    }
    long double my = 0, mf = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        my += y[i];
        mf += fit[i];
    }
    my /= y.size();
    mf /= y.size();
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (fit[i] - mf) * (y[i] - my);
        sxx += (fit[i] - mf) * (fit[i] - mf);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxx == 0 || syy == 0 ? 0.0 : static_cast<double>(sxy / std::sqrt(sxx * syy));
}

Outcome homogenizer_recovery() {
    Fixture& f = fixture();
    const SyntheticSpec spec = synthetic_preset("hidden_readout");
    const auto data = cli::make_bundle("hidden_readout", gen_synthetic(spec), SplitMode::holdout, 0.1);
    FusionConfig fc;
    fc.d_het = 4;
    TrainConfig tc = f.train;
    auto run = train_adapter(data.prepared, data.splits, f.backbone,
                             Adapter(data.dataset.schema, f.backbone.config(), fc, 42), tc);
    const auto readout = hidden_readout(spec);
    const ChannelRegistry& reg = run.adapter.registry();
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < reg.m_known(); ++c)
        if (reg.at(c).kind == "heterogeneous") cols.push_back(c);
    std::vector<std::vector<double>> X;
    std::vector<double> truth;
    for (const auto& win : data.splits.test) {
        const WindowData w = make_window(data.prepared, win);
        AdapterTrace trace;
        run.adapter.forecast(f.backbone, w, &trace);
        const Tensor& F = w.het.at(0);
        for (std::size_t t = 0; t < F.rows(); ++t) {
            double r = 0.0;
            for (std::size_t j = 0; j < F.cols(); ++j) r += readout[j] * F.at(t, j);
            truth.push_back(r);
            std::vector<double> row;
            for (std::size_t c : cols) row.push_back(trace.known_channels.at(t, c));
            X.push_back(std::move(row));
        }
    }
    const double rho = best_linear_rho(X, truth);
    const bool pass = cols.size() == 4 && std::abs(rho) >= 0.9;
    return {pass, fmt("|rho| %.4f from %g homogenized channels", std::abs(rho), static_cast<double>(cols.size())) +
                      " over " + std::to_string(truth.size()) + " held-out steps"};
}

Outcome fusion_position_stability() {
    const cli::AblationInput in = driver_input();
    std::vector<std::pair<std::string, double>> avg;
    const std::pair<Position, Position> arms[] = {
        {Position::pre, Position::pre}, {Position::post, Position::pre}, {Position::post, Position::post}};
    for (const auto& [past, future] : arms) {
        FusionConfig c;
        c.past_position = past;
        c.future_position = future;
        const auto r = cli::run_adapter_arm("", in, c);
        avg.emplace_back(to_string(past) + "-" + to_string(future), r.report.average_normalized);
    }
    avg.emplace_back("pre-post", clean_arm().report.average_normalized);
    double lo = avg[0].second, hi = avg[0].second;
    std::string detail;
    for (const auto& [name, v] : avg) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        detail += name + fmt(" %.4f, ", v);
    }
    const double band = (hi - lo) / lo;
    return {band <= 0.15, detail + fmt("relative band %.2f%%", 100.0 * band)};
}

std::string read_all(const fs::path& p) { return read_text_file(p); }

int sh(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("unica_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::string cli = UNICA_CLI;
    const std::map<std::string, std::string> configs{
        {"synth.json", R"({"recipe":"driver","n_series":4,"length":240,"context":48,"horizon":12})"},
        {"pretrain.json",
         R"({"corpus":{"recipe":"pretrain","n_series":8,"length":240,"context":48,"horizon":12},)"
         R"("backbone":{"context":48,"horizon":12,"d_model":16,"layers":1,"heads":2},"steps":200})"},
        {"adapt.json",
         R"({"data":"out/dataset.json","backbone":"out/backbone.json","fusion":{"heads":2},)"
         R"("train":{"max_epochs":3,"steps_per_epoch":20}})"},
        {"forecast.json", R"({"data":"out/dataset.json","backbone":"out/backbone.json","adapter":"out/adapter.json"})"},
        {"eval.json", R"({"data":"out/dataset.json","forecasts":"out/forecasts.json","method":"unica"})"},
    };
    const std::vector<std::pair<std::string, std::string>> steps{
        {"synth", "synth.json"}, {"pretrain", "pretrain.json"}, {"adapt", "adapt.json"},
        {"forecast", "forecast.json"}, {"eval", "eval.json"}};
    auto pipeline = [&](const fs::path& dir, bool from_resolved) {
        fs::create_directories(dir);
        for (const auto& [name, text] : configs) write_text_file(dir / name, text);
        for (const auto& [cmd, cfg] : steps) {
            std::string file = cfg;
            if (from_resolved) {
                fs::copy_file(root / "run1" / "out" / (cmd + ".config.json"), dir / ("resolved_" + cmd + ".json"),
                              fs::copy_options::overwrite_existing);
                file = "resolved_" + cmd + ".json";
            }
            const int rc = sh("cd '" + dir.string() + "' && '" + cli + "' " + cmd + " --config " + file + " --out out --seed 42");
            if (rc != 0) return cmd + " exited with status " + std::to_string(rc);
        }
        return std::string();
    };
    std::string err = pipeline(root / "run1", false);
    if (err.empty()) err = pipeline(root / "run2", false);
    if (err.empty()) err = pipeline(root / "run3", true);
    if (!err.empty()) return {false, err};

    std::size_t files = 0;
    std::vector<std::string> diffs;
    for (const auto& entry : fs::directory_iterator(root / "run1" / "out")) {
        ++files;
        const std::string name = entry.path().filename().string();
        const std::string a = read_all(entry.path());
        for (const char* other : {"run2", "run3"})
            if (!fs::exists(root / other / "out" / name) || read_all(root / other / "out" / name) != a)
                diffs.push_back(std::string(other) + "/" + name);
    }
    fs::remove_all(root);
    std::string detail = std::to_string(files) + " output files compared across 3 runs (one from resolved configs)";
    for (const auto& d : diffs) detail += "; differs: " + d;
    return {diffs.empty() && files >= 11, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gate-zero identity", gate_zero_identity},
        {"gradient correctness", gradient_correctness},
        {"frozen-backbone preservation", frozen_backbone},
        {"simplex invariants", simplex},
        {"affine equivariance", affine_equivariance},
        {"covariate lift", covariate_lift},
        {"noise robustness", noise_robustness},
        {"metric oracle equivalence", metric_oracle},
        {"homogenizer recovery", homogenizer_recovery},
        {"fusion-position stability", fusion_position_stability},
        {"determinism", determinism},
    };
    const auto t0 = std::chrono::steady_clock::now();
    fixture();
    std::printf("fixture: pretrained default backbone and driver data in %.1f s\n",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %2zu %s  %s: %s (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%zu/%zu criteria passed in %.1f s\n", criteria.size() - failed, criteria.size(),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return failed == 0 ? 0 : 1;
}
