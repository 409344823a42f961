#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "toy_data.hpp"
#include "unica/errors.hpp"
#include "unica/gradcheck.hpp"
#include "unica/homogenize.hpp"
#include "unica/ops.hpp"

using namespace unica;
using unica::testing::ToyOptions;
using unica::testing::toy_dataset;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape) {
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor x(std::move(shape));
    for (auto& v : x.data()) v = g(rng);
    return x;
}

std::size_t count_source(const std::vector<ChannelInfo>& cols, const std::string& name) {
    std::size_t n = 0;
    for (const auto& c : cols) n += c.source == name;
    return n;
}

}  // namespace

TEST(EmbedCategorical, LookupExamples) {
    Rng rng(1);
    CategoricalVocab v("weekday", 7, 4, rng);
    Tape t(false);
    const std::vector<std::size_t> ids{2, 5, 2};
    const Tensor e = embed_categorical(t, ids, v).value();
    ASSERT_EQ(e.shape(), (Shape{3, 4}));
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_EQ(e.at(0, c), e.at(2, c));
        EXPECT_EQ(e.at(0, c), v.embedding.value.at(2, c));
        EXPECT_EQ(e.at(1, c), v.embedding.value.at(5, c));
    }
    v.embedding.value.fill(0.0);
    for (double x : embed_categorical(t, ids, v).value().data()) EXPECT_EQ(x, 0.0);
}

TEST(EmbedCategorical, OutOfRangeNamesCovariate) {
    Rng rng(1);
    CategoricalVocab v("store", 3, 2, rng);
    Tape t(false);
    const std::vector<std::size_t> ids{0, 3};
    try {
        embed_categorical(t, ids, v);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("store"), std::string::npos);
    }
}

TEST(EmbedCategorical, GradientOnlyInTouchedRow) {
    Rng rng(2);
    CategoricalVocab v("c", 6, 3, rng);
    std::mt19937_64 r(3);
    const Tensor w = random_tensor(r, {2, 3});
    const std::vector<std::size_t> ids{3, 3};
    auto f = [&](Tape& t) { return ops::sum(ops::mul(ops::elu(embed_categorical(t, ids, v)), t.constant(w))); };
    const auto res = finite_diff_check(f, {&v.embedding});
    EXPECT_LE(res.max_rel_error, 1e-6);
    for (std::size_t row = 0; row < 6; ++row)
        for (std::size_t c = 0; c < 3; ++c) {
            if (row == 3) EXPECT_NE(v.embedding.grad.at(row, c), 0.0);
            else EXPECT_EQ(v.embedding.grad.at(row, c), 0.0);
        }
}

TEST(Homogenizer, ZeroAndIdentity) {
    Rng rng(4);
    Homogenizer h("f", HomogenizerKind::linear, 5, 4, rng);
    for (auto* p : std::vector<Parameter*>{&h.first.W, &h.first.b}) p->value.fill(0.0);
    std::mt19937_64 r(5);
    Tape t(false);
    for (double x : h(t, t.constant(random_tensor(r, {7, 5}))).value().data()) EXPECT_EQ(x, 0.0);

    Homogenizer id("g", HomogenizerKind::linear, 1, 1, rng);
    id.first.W.value[0] = 1.0;
    id.first.b.value[0] = 0.0;
    const Tensor in = random_tensor(r, {9, 1});
    EXPECT_EQ(id(t, t.constant(in)).value(), in);
}

TEST(Homogenizer, LinearStructureIsAffine) {
    Rng rng(6);
    Homogenizer h("f", HomogenizerKind::linear, 6, 4, rng);
    std::mt19937_64 r(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor f1 = random_tensor(r, {5, 6}), f2 = random_tensor(r, {5, 6});
        const double a = u(r), b = u(r);
        Tensor mix({5, 6});
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * f1[i] + b * f2[i];
        Tape t(false);
        const Tensor lhs = h(t, t.constant(mix)).value();
        const Tensor h1 = h(t, t.constant(f1)).value(), h2 = h(t, t.constant(f2)).value();
        for (std::size_t row = 0; row < 5; ++row)
            for (std::size_t c = 0; c < 4; ++c) {
                const double rhs = a * h1.at(row, c) + b * h2.at(row, c) - (a + b - 1.0) * h.first.b.value[c];
                EXPECT_NEAR(lhs.at(row, c), rhs, 1e-12);
            }
    }
}

TEST(Homogenizer, MlpShapeAndWidthCheck) {
    Rng rng(8);
    Homogenizer h("f", HomogenizerKind::mlp, 6, 4, rng);
    EXPECT_EQ(h.in(), 6u);
    EXPECT_EQ(h.out(), 4u);
    Tape t(false);
    std::mt19937_64 r(9);
    EXPECT_EQ(h(t, t.constant(random_tensor(r, {3, 6}))).shape(), (Shape{3, 4}));
    EXPECT_THROW(h(t, t.constant(random_tensor(r, {3, 5}))), ContractError);
    EXPECT_THROW(parse_homogenizer("conv"), ConfigError);
}

TEST(Registry, CountsKnownRealsAndHeterogeneous) {
    ToyOptions o;
    o.known_real = 2;
    o.het_known_dim = 10;
    const Dataset ds = toy_dataset(o);
    const ChannelRegistry r = build_registry(ds.schema, 4, 4);
    EXPECT_EQ(r.m_known(), 6u);
    EXPECT_EQ(r.m_past(), 0u);

    Schema with_time = ds.schema;
    with_time.time_features = true;
    EXPECT_EQ(build_registry(with_time, 4, 4).m_known(), 6u + time_feature_names(Frequency::hourly).size());
}

TEST(Registry, EveryCovariateListedWithItsWidth) {
    ToyOptions o;
    o.known_real = 1;
    o.known_cat_vocab = 5;
    o.past_real = 2;
    o.nullable_past = true;
    o.het_known_dim = 3;
    o.het_past_dim = 7;
    o.static_cat_vocab = 2;
    const Dataset ds = toy_dataset(o);
    const std::size_t d_emb = 3, d_het = 2;
    const ChannelRegistry r = build_registry(ds.schema, d_emb, d_het);
    EXPECT_EQ(count_source(r.known, "k0"), 1u);
    EXPECT_EQ(count_source(r.known, "cat"), d_emb);
    EXPECT_EQ(count_source(r.known, "hk"), d_het);
    EXPECT_EQ(count_source(r.past, "p0"), 1u);
    EXPECT_EQ(count_source(r.past, "p1"), 1u);
    EXPECT_EQ(count_source(r.past, "missing:p0"), 1u);
    EXPECT_EQ(count_source(r.past, "hp"), d_het);
    EXPECT_EQ(count_source(r.known, "group") + count_source(r.past, "group"), 0u);
    EXPECT_EQ(r.size(), 1 + d_emb + d_het + 4 + d_het);
    EXPECT_EQ(r.at(r.m_known()).source, "p0");
    EXPECT_THROW(r.at(r.size()), ContractError);
}

TEST(Assemble, ShapesFollowRegistryNotData) {
    ToyOptions o;
    o.known_real = 2;
    o.known_cat_vocab = 4;
    o.past_real = 1;
    o.het_known_dim = 5;
    o.het_past_dim = 3;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        o.seed = seed;
        const Dataset ds = toy_dataset(o);
        const PreparedDataset pd = prepare(ds);
        const ChannelRegistry reg = build_registry(ds.schema, 4, 4);
        Rng rng(seed);
        std::vector<CategoricalVocab> vocabs{CategoricalVocab("cat", 4, 4, rng)};
        std::vector<Homogenizer> hs{Homogenizer("hk", HomogenizerKind::linear, 5, 4, rng),
                                    Homogenizer("hp", HomogenizerKind::linear, 3, 4, rng)};
        Tape t(false);
        const UnifiedCovariates u = assemble(t, make_window(pd, {0, 40}), reg, vocabs, hs, ds.schema);
        EXPECT_EQ(u.known.shape(), (Shape{40, 2 + 4 + 4}));
        EXPECT_EQ(u.past.shape(), (Shape{32, 1 + 4}));
    }
}

TEST(Assemble, NoCovariatesGivesEmptyBlocks) {
    const Dataset ds = toy_dataset(ToyOptions{});
    const PreparedDataset pd = prepare(ds);
    const ChannelRegistry reg = build_registry(ds.schema, 4, 4);
    EXPECT_EQ(reg.size(), 0u);
    std::vector<CategoricalVocab> vocabs;
    std::vector<Homogenizer> hs;
    Tape t(false);
    const UnifiedCovariates u = assemble(t, make_window(pd, {1, 32}), reg, vocabs, hs, ds.schema);
    EXPECT_FALSE(u.known.valid());
    EXPECT_FALSE(u.past.valid());
}

TEST(Assemble, NeverReadsTarget) {
    ToyOptions o;
    o.known_real = 1;
    o.past_real = 1;
    o.het_known_dim = 2;
    const Dataset ds = toy_dataset(o);
    const PreparedDataset pd = prepare(ds);
    const ChannelRegistry reg = build_registry(ds.schema, 4, 4);
    Rng rng(3);
    std::vector<CategoricalVocab> vocabs;
    std::vector<Homogenizer> hs{Homogenizer("hk", HomogenizerKind::mlp, 2, 4, rng)};
    WindowData w = make_window(pd, {0, 48});
    Tape t(false);
    const UnifiedCovariates a = assemble(t, w, reg, vocabs, hs, ds.schema);
    for (auto& v : w.history) v = 1e6 - v;
    for (auto& v : w.future) v = -v;
    const UnifiedCovariates b = assemble(t, w, reg, vocabs, hs, ds.schema);
    EXPECT_EQ(a.known.value(), b.known.value());
    EXPECT_EQ(a.past.value(), b.past.value());
}
