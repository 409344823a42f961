#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "unica/backbone.hpp"
#include "unica/errors.hpp"
#include "unica/gradcheck.hpp"
#include "unica/ops.hpp"
#include "unica/optim.hpp"
#include "unica/split.hpp"
#include "unica/synthetic.hpp"

using namespace unica;

namespace {

BackboneConfig small_config() {
    BackboneConfig c;
    c.context = 32;
    c.horizon = 8;
    c.patch = 8;
    c.d_model = 16;
    c.layers = 1;
    c.heads = 2;
    return c;
}

std::vector<double> random_series(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = 3.0 + g(rng);
    return v;
}

Parameter& find(Backbone& b, const std::string& name) {
    for (auto* p : b.parameters())
        if (p->name == name) return *p;
    throw std::runtime_error("no parameter " + name);
}

double pinball_crps(const std::vector<std::vector<double>>& ys, const std::vector<Tensor>& qs,
                    const std::vector<double>& levels) {
    double total = 0.0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        double num = 0.0, den = 0.0;
        for (std::size_t f = 0; f < ys.size(); ++f)
            for (std::size_t h = 0; h < ys[f].size(); ++h) {
                const double q = qs[f].at(h, k), y = ys[f][h];
                num += y < q ? (1.0 - levels[k]) * (q - y) : levels[k] * (y - q);
                den += std::abs(y);
            }
        total += 2.0 * num / den;
    }
    return total / static_cast<double>(levels.size());
}

}  // namespace

TEST(InstanceNormalize, Examples) {
    const std::vector<double> x{1, 2, 3};
    const Normalized n = instance_normalize(x);
    EXPECT_DOUBLE_EQ(n.mu, 2.0);
    EXPECT_NEAR(n.sigma, std::sqrt(2.0 / 3.0), 1e-15);
    EXPECT_NEAR(n.z[0], -1.224744871391589, 1e-12);
    EXPECT_EQ(n.z[1], 0.0);
    EXPECT_NEAR(n.z[2], 1.224744871391589, 1e-12);

    const std::vector<double> c{5, 5, 5};
    const Normalized nc = instance_normalize(c);
    EXPECT_EQ(nc.sigma, 1e-6);
    for (double z : nc.z) EXPECT_EQ(z, 0.0);
}

TEST(InstanceNormalize, RoundTrip) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_series(rng, 40);
        const Normalized n = instance_normalize(x);
        const auto back = denormalize(n.z, n.mu, n.sigma);
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
    }
}

TEST(Tokenize, TokenCounts) {
    BackboneConfig cfg;
    Backbone b(cfg, 1);
    Tape t(false);
    std::vector<double> x(96, 1.0), m(96, 1.0);
    Var tok = b.tokenize_series(t, x, m);
    EXPECT_EQ(tok.shape(), (Shape{12, cfg.d_model}));
    std::vector<double> s(10, 1.0), sm(10, 1.0);
    EXPECT_EQ(b.tokenize_series(t, s, sm).shape(), (Shape{2, cfg.d_model}));
}

TEST(Tokenize, LeftPaddingIsMasked) {
    Tape t(false);
    std::vector<double> v(10);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
    Var p = ops::patchify(t.constant(Tensor({10, 1}, v)), Tensor(), 8);
    ASSERT_EQ(p.shape(), (Shape{2, 16}));
    const Tensor& pv = p.value();
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_EQ(pv.at(0, k), 0.0);
        EXPECT_EQ(pv.at(0, 8 + k), 0.0);
    }
    EXPECT_EQ(pv.at(0, 6), 1.0);
    EXPECT_EQ(pv.at(0, 14), 1.0);
    EXPECT_EQ(pv.at(1, 7), 10.0);
}

TEST(Tokenize, Deterministic) {
    Backbone b(small_config(), 5);
    std::mt19937_64 rng(1);
    const auto x = random_series(rng, 32);
    const std::vector<double> m(32, 1.0);
    Tape t1(false), t2(false);
    EXPECT_EQ(b.tokenize_series(t1, x, m).value(), b.tokenize_series(t2, x, m).value());
}

TEST(Encode, ZeroBlockWeightsAddPositionsOnly) {
    const BackboneConfig cfg = small_config();
    Backbone b(cfg, 2);
    for (auto* p : b.parameters())
        if (p->name.rfind("encoder.blocks.", 0) == 0) p->value.fill(0.0);
    std::mt19937_64 rng(4);
    const auto x = random_series(rng, 20);  // 3 tokens, fewer than the 4 positions
    const std::vector<double> m(20, 1.0);
    Tape t(false);
    Var tok = b.tokenize_series(t, x, m);
    const Tensor out = b.encode(t, tok).value();
    const Tensor& pos = find(b, "encoder.pos").value;
    ASSERT_EQ(out.shape(), tok.shape());
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) EXPECT_EQ(out.at(r, c), tok.value().at(r, c) + pos.at(r, c));
}

TEST(Encode, AttentionRowsOnSimplex) {
    Backbone b(small_config(), 3);
    std::mt19937_64 rng(5);
    const auto x = random_series(rng, 32);
    const std::vector<double> m(32, 1.0);
    Tape t(false);
    std::vector<Tensor> weights;
    b.encode(t, b.tokenize_series(t, x, m), &weights);
    ASSERT_EQ(weights.size(), 2u);
    for (const auto& w : weights)
        for (std::size_t r = 0; r < w.rows(); ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < w.cols(); ++c) {
                EXPECT_GE(w.at(r, c), 0.0);
                s += w.at(r, c);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
}

TEST(Predict, ShapeAndSortedRows) {
    BackboneConfig cfg;
    Backbone b(cfg, 7);
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor f = b.forecast(random_series(rng, 96));
        ASSERT_EQ(f.shape(), (Shape{24, 9}));
        for (std::size_t h = 0; h < f.rows(); ++h)
            for (std::size_t k = 0; k + 1 < f.cols(); ++k) EXPECT_LE(f.at(h, k), f.at(h, k + 1));
    }
}

TEST(Predict, ZeroPredictorGivesContextMean) {
    const BackboneConfig cfg = small_config();
    Backbone b(cfg, 8);
    for (auto* p : b.parameters())
        if (p->name.rfind("predictor", 0) == 0) p->value.fill(0.0);
    std::mt19937_64 rng(7);
    const auto x = random_series(rng, 32);
    const double mu = instance_normalize(x).mu;
    const Tensor f = b.forecast(x);
    for (double v : f.data()) EXPECT_EQ(v, mu);
}

TEST(Backbone, AffineEquivariance) {
    Backbone b(small_config(), 9);
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_series(rng, 32);
        const Tensor base = b.forecast(x);
        for (double a : {0.5, 3.0})
            for (double c : {-2.0, 10.0}) {
                std::vector<double> y(x);
                for (auto& v : y) v = a * v + c;
                const Tensor f = b.forecast(y);
                for (std::size_t i = 0; i < f.size(); ++i) {
                    const double want = a * base[i] + c;
                    EXPECT_LE(std::abs(f[i] - want), 1e-9 * std::max(1.0, std::abs(want)));
                }
            }
    }
}

TEST(Backbone, SameSeedSameModel) {
    Backbone a(small_config(), 11), b(small_config(), 11), c(small_config(), 12);
    EXPECT_EQ(a.content_hash(), b.content_hash());
    EXPECT_NE(a.content_hash(), c.content_hash());
    std::mt19937_64 rng(9);
    const auto x = random_series(rng, 32);
    EXPECT_EQ(a.forecast(x), b.forecast(x));
}

TEST(Backbone, WrongContextLengthThrows) {
    Backbone b(small_config(), 1);
    std::vector<double> x(31, 1.0);
    EXPECT_THROW(b.forecast(x), ContractError);
}

TEST(Backbone, BadConfigThrows) {
    BackboneConfig c = small_config();
    c.heads = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = small_config();
    c.levels = {0.9, 0.1};
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Checkpoint, RoundTripAndTamper) {
    Backbone b(small_config(), 13);
    b.freeze();
    const auto dir = std::filesystem::temp_directory_path() / "unica_backbone_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "bb.json";
    b.save(path);
    Backbone r = Backbone::load(path);
    EXPECT_EQ(r.content_hash(), b.content_hash());
    std::mt19937_64 rng(10);
    const auto x = random_series(rng, 32);
    EXPECT_EQ(r.forecast(x), b.forecast(x));

    Json j = b.to_json();
    j["params"].begin().value()["data"][0] = 123.0;
    EXPECT_THROW(Backbone::from_json(j), CompatibilityError);
    Json k = b.to_json();
    k["kind"] = "adapter";
    EXPECT_THROW(Backbone::from_json(k), CompatibilityError);
    EXPECT_THROW(Backbone::load(dir / "missing.json"), DataError);
}

TEST(Freeze, GradientsFlowThroughFrozenBackbone) {
    Backbone b(small_config(), 14);
    b.freeze();
    Parameter input("input", Tensor({32, 1}, 0.0));
    std::mt19937_64 rng(11);
    const auto x = random_series(rng, 32);
    for (std::size_t i = 0; i < 32; ++i) input.value[i] = instance_normalize(x).z[i];
    const Tensor w(Shape{8, 9}, 0.37);
    auto f = [&](Tape& t) {
        Var states = b.encode(t, b.tokenize(t, t.param(input)));
        return ops::sum(ops::mul(b.predict(t, states), t.constant(w)));
    };
    const auto res = finite_diff_check(f, {&input}, 1e-6);
    EXPECT_LE(res.max_rel_error, 1e-5);
    double norm = 0.0;
    for (double g : input.grad.data()) norm += std::abs(g);
    EXPECT_GT(norm, 0.0);
    for (auto* p : b.parameters()) {
        EXPECT_TRUE(p->frozen);
        for (double g : p->grad.data()) EXPECT_EQ(g, 0.0);
    }
    EXPECT_EQ(b.content_hash(), b.frozen_hash());
}

TEST(Freeze, UnfreezeAllowsUpdates) {
    Backbone b(small_config(), 15);
    b.freeze();
    const std::string before = b.content_hash();
    b.unfreeze();
    std::mt19937_64 rng(12);
    const auto x = random_series(rng, 40);
    Adam adam(b.parameters());
    Tape t;
    const std::vector<double> hist(x.begin(), x.begin() + 32), obs(32, 1.0);
    const Normalized n = instance_normalize(hist);
    std::vector<double> y(8);
    for (std::size_t h = 0; h < 8; ++h) y[h] = (x[32 + h] - n.mu) / n.sigma;
    t.backward(ops::quantile_loss(b.predict(t, b.encode(t, b.tokenize_series(t, hist, obs))), y, b.config().levels));
    adam.step(1e-3, 0.0);
    EXPECT_NE(b.content_hash(), before);
}

TEST(Pretrain, LossDecreasesAndDeterministic) {
    SyntheticSpec spec = synthetic_preset("pretrain");
    spec.n_series = 16;
    spec.length = 200;
    const Dataset corpus = gen_synthetic(spec);
    PretrainConfig pc;
    pc.steps = 300;
    const Backbone a = pretrain(corpus, small_config(), pc);
    EXPECT_LT(a.info().final_loss, a.info().initial_loss);
    const Backbone b = pretrain(corpus, small_config(), pc);
    EXPECT_EQ(dump_stable(a.to_json()), dump_stable(b.to_json()));
}

TEST(Pretrain, BeatsNaiveOnSeasonalData) {
    SyntheticSpec spec = synthetic_preset("pretrain");
    spec.n_series = 32;
    spec.length = 300;
    PretrainConfig pc;
    pc.steps = 1000;
    Backbone b = pretrain(gen_synthetic(spec), small_config(), pc);

    SyntheticSpec test_spec = synthetic_preset("seasonal");
    test_spec.context = 32;
    test_spec.horizon = 8;
    test_spec.seed = 7;
    const PreparedDataset pd = prepare(gen_synthetic(test_spec));
    const Splits sp = split(pd, SplitMode::sliding);
    std::vector<std::vector<double>> ys;
    std::vector<Tensor> model, naive;
    for (const auto& w : sp.test) {
        const WindowData d = make_window(pd, w);
        ys.push_back(d.future);
        model.push_back(b.forecast(d.history, d.history_observed));
        naive.push_back(Tensor({8, 9}, d.history.back()));
    }
    const double ratio = pinball_crps(ys, model, b.config().levels) / pinball_crps(ys, naive, b.config().levels);
    EXPECT_LT(ratio, 1.0);
}
