#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "aqc/errors.hpp"
#include "aqc/seq_model/checkpoint.hpp"
#include "aqc/seq_model/model.hpp"

using namespace aqc;
using namespace aqc::model;
using data::WindowSample;
using num::Tensor;
using num::Var;

namespace {

Tensor full(std::size_t r, std::size_t c, double v) { return Tensor(num::Shape{r, c}, v); }

geo::ScaledLaplacian ring_laplacian(std::size_t n) {
    Tensor w = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        w(i, j) = w(j, i) = 1.0 + 0.1 * static_cast<double>(i);
    }
    return geo::scaled_laplacian(w, geo::LaplacianSource::distance);
}

ModelConfig small_config(std::size_t history, std::size_t horizon, std::size_t d) {
    ModelConfig cfg;
    cfg.history = history;
    cfg.horizon = horizon;
    cfg.gru_hidden = 5;
    cfg.head_hidden = 6;
    cfg.de.latent_dim = d;
    cfg.de.flow_hidden = 4;
    cfg.seed = 7;
    return cfg;
}

WindowSample random_window(std::mt19937_64& rng, std::size_t history, std::size_t horizon, std::size_t n) {
    std::normal_distribution<double> pm(60.0, 25.0), wind(0.0, 3.0);
    WindowSample s;
    s.x_hist = Tensor::zeros(history, n);
    s.x_future = Tensor::zeros(horizon, n);
    s.p_hist = Tensor(num::Shape{history, n, 2}, 0.0);
    for (double& v : s.x_hist.values()) v = std::max(1.0, pm(rng));
    for (double& v : s.x_future.values()) v = std::max(1.0, pm(rng));
    for (double& v : s.p_hist.values()) v = wind(rng);
    return s;
}

std::unique_ptr<AirPhyNet> small_model(std::size_t n = 4, std::size_t history = 3, std::size_t horizon = 3,
                                       std::size_t d = 4) {
    auto m = std::make_unique<AirPhyNet>(small_config(history, horizon, d), ring_laplacian(n));
    m->set_normalization({55.0, 20.0});
    return m;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("aqc_seq_" + name)).string();
}

}  // namespace

// ---- GRU -----------------------------------------------------------------------

TEST(Gru, AllZeroWeightsHalveTheState) {
    const std::size_t h = 3;
    GRUVars g{num::constant(full(1, 3 * h, 0.0)), num::constant(full(h, 2 * h, 0.0)),
              num::constant(full(h, h, 0.0)), num::constant(full(1, 3 * h, 0.0))};
    const Tensor h0 = Tensor::matrix({{1.0, -2.0, 0.5}, {0.2, 0.0, 4.0}});
    const Var out = gru_step(g, num::constant(Tensor::matrix({{3.0}, {-1.0}})), num::constant(h0));
    for (std::size_t i = 0; i < h0.size(); ++i) EXPECT_DOUBLE_EQ(out.value()[i], 0.5 * h0[i]);
}

TEST(Gru, ClosedUpdateGateKeepsTheState) {
    const std::size_t h = 2;
    Tensor b = full(1, 3 * h, 0.0);
    for (std::size_t j = h; j < 2 * h; ++j) b[j] = -20.0;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor wx = full(1, 3 * h, 0.0), wh = full(h, 2 * h, 0.0);
    for (std::size_t j = 0; j < h; ++j) wx[j] = g(rng);
    for (std::size_t j = 0; j < h; ++j) wh(0, j) = g(rng);
    GRUVars gv{num::constant(wx), num::constant(wh), num::constant(full(h, h, 0.0)), num::constant(b)};
    const Tensor h0 = Tensor::matrix({{0.7, -0.3}});
    const Var out = gru_step(gv, num::constant(Tensor::matrix({{2.0}})), num::constant(h0));
    for (std::size_t i = 0; i < h0.size(); ++i) EXPECT_NEAR(out.value()[i], h0[i], 1e-8);
}

TEST(Gru, OutputStaysBetweenStateAndCandidateRange) {
    // h' is a convex mix of h and a tanh value, so |h'| <= max(|h|, 1).
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 2.0);
    const std::size_t h = 4;
    auto rnd = [&](std::size_t r, std::size_t c) {
        Tensor t = Tensor::zeros(r, c);
        for (double& v : t.values()) v = g(rng);
        return t;
    };
    for (int trial = 0; trial < 20; ++trial) {
        GRUVars gv{num::constant(rnd(1, 3 * h)), num::constant(rnd(h, 2 * h)), num::constant(rnd(h, h)),
                   num::constant(rnd(1, 3 * h))};
        const Tensor h0 = rnd(3, h);
        const Var out = gru_step(gv, num::constant(rnd(3, 1)), num::constant(h0));
        for (std::size_t i = 0; i < h0.size(); ++i) {
            EXPECT_LE(std::abs(out.value()[i]), std::max(std::abs(h0[i]), 1.0) + 1e-12);
        }
    }
}

TEST(Gru, RejectsMismatchedHiddenSize) {
    GRUVars g{num::constant(full(1, 6, 0.0)), num::constant(full(2, 4, 0.0)), num::constant(full(2, 2, 0.0)),
              num::constant(full(1, 6, 0.0))};
    EXPECT_THROW(gru_step(g, num::constant(full(1, 1, 0.0)), num::constant(full(1, 3, 0.0))), DimensionError);
}

// ---- latent sampling -----------------------------------------------------------

TEST(Reparameterize, Examples) {
    const Var mu = num::constant(Tensor::matrix({{1.0, -2.0}}));
    const Var sigma = num::constant(Tensor::matrix({{0.5, 3.0}}));
    const Tensor eps = Tensor::matrix({{2.0, -1.0}});
    const Var z = reparameterize(mu, sigma, eps, ode::Mode::train);
    EXPECT_DOUBLE_EQ(z.value()[0], 2.0);
    EXPECT_DOUBLE_EQ(z.value()[1], -5.0);
    EXPECT_EQ(reparameterize(mu, sigma, eps, ode::Mode::infer).value(), mu.value());
    EXPECT_THROW(reparameterize(mu, sigma, Tensor::matrix({{1.0}}), ode::Mode::train), DimensionError);
}

TEST(Reparameterize, SampleMomentsMatchMuAndSigma) {
    const std::size_t n = 200000;
    const Var mu = num::constant(full(n, 1, 1.5));
    const Var sigma = num::constant(full(n, 1, 0.4));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor eps = Tensor::zeros(n, 1);
    for (double& v : eps.values()) v = g(rng);
    const Tensor z = reparameterize(mu, sigma, eps, ode::Mode::train).value();
    double mean = 0.0, sq = 0.0;
    for (double v : z.values()) mean += v;
    mean /= n;
    for (double v : z.values()) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / (n - 1));
    // Five standard errors.
    EXPECT_NEAR(mean, 1.5, 5.0 * 0.4 / std::sqrt(double(n)));
    EXPECT_NEAR(sd, 0.4, 5.0 * 0.4 / std::sqrt(2.0 * n));
}

// ---- normalization ---------------------------------------------------------------

TEST(Normalization, RoundTrip) {
    const Normalization norm{63.2, 41.7};
    for (double x : {0.0, 1.5, 63.2, 500.0, 999.9}) EXPECT_NEAR(norm.denormalize(norm.normalize(x)), x, 1e-12);
    EXPECT_DOUBLE_EQ(norm.normalize(63.2 + 41.7), 1.0);
}

TEST(Normalization, ModelRejectsBadStatistics) {
    AirPhyNet m(small_config(3, 3, 4), ring_laplacian(4));
    EXPECT_THROW(m.set_normalization({1.0, 0.0}), ConfigError);
    EXPECT_THROW(m.set_normalization({NAN, 1.0}), ConfigError);
}

// ---- model -----------------------------------------------------------------------

TEST(AirPhyNet, ZeroEncoderGivesStandardNormalLatent) {
    auto m = small_model();
    for (auto* p : m->parameters().all())
        if (p->name().rfind("gru.", 0) == 0 || p->name().rfind("head.", 0) == 0) p->value() *= 0.0;
    std::mt19937_64 rng(4);
    const WindowSample s = random_window(rng, 3, 3, 4);
    const WindowSample* one = &s;
    const auto lat = m->encode({&one, 1}, nullptr);
    EXPECT_EQ(lat.mu.shape(), (num::Shape{4, 4}));
    for (double v : lat.mu.value().values()) EXPECT_EQ(v, 0.0);
    for (double v : lat.sigma.value().values()) EXPECT_EQ(v, 1.0);
}

TEST(AirPhyNet, ZeroModelPredictsDenormalizedDecoderBias) {
    auto m = small_model();
    for (auto* p : m->parameters().all())
        if (p->name() != "de.k_raw") p->value() *= 0.0;
    m->parameters().find("decoder.b")->value()[0] = 0.5;
    std::mt19937_64 rng(5);
    const Tensor pred = m->predict(random_window(rng, 3, 3, 4));
    EXPECT_EQ(pred.shape(), (num::Shape{3, 4}));
    for (double v : pred.values()) EXPECT_NEAR(v, 55.0 + 0.5 * 20.0, 1e-12);
}

TEST(AirPhyNet, OutputShapesAreFinite) {
    auto m = small_model(5, 4, 6, 3);
    std::mt19937_64 rng(6);
    std::vector<WindowSample> ws;
    for (int i = 0; i < 3; ++i) ws.push_back(random_window(rng, 4, 6, 5));
    std::vector<const WindowSample*> batch;
    for (const auto& w : ws) batch.push_back(&w);
    num::Rng noise(1);
    for (ode::Mode mode : {ode::Mode::train, ode::Mode::infer}) {
        const auto out = m->forward_normalized(batch, {mode, nullptr, &noise, nullptr});
        ASSERT_EQ(out.size(), 6u);
        for (const auto& step : out) {
            EXPECT_EQ(step.shape(), (num::Shape{15, 1}));
            for (double v : step.value().values()) EXPECT_TRUE(std::isfinite(v));
        }
    }
    const Tensor pred = m->predict(ws[0]);
    EXPECT_EQ(pred.shape(), (num::Shape{6, 5}));
}

TEST(AirPhyNet, InferIsDeterministicAndBatchIndependent) {
    auto m = small_model();
    std::mt19937_64 rng(7);
    const WindowSample a = random_window(rng, 3, 3, 4), b = random_window(rng, 3, 3, 4);
    const Tensor pa = m->predict(a);
    EXPECT_EQ(m->predict(a), pa);
    std::vector<const WindowSample*> batch{&b, &a};
    const auto out = m->forward_normalized(batch, {});
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(m->normalization()->denormalize(out[k].value()[4 + i]), pa(k, i));
}

TEST(AirPhyNet, TrainModeNeedsNoiseSource) {
    auto m = small_model();
    std::mt19937_64 rng(8);
    const WindowSample s = random_window(rng, 3, 3, 4);
    const WindowSample* one = &s;
    EXPECT_THROW(m->forward_normalized({&one, 1}, {ode::Mode::train, nullptr, nullptr, nullptr}), ConfigError);
}

TEST(AirPhyNet, RejectsMissingNormalizationAndBadShapes) {
    AirPhyNet bare(small_config(3, 3, 4), ring_laplacian(4));
    std::mt19937_64 rng(9);
    EXPECT_THROW(bare.predict(random_window(rng, 3, 3, 4)), ConfigError);

    auto m = small_model();
    EXPECT_THROW(m->predict(random_window(rng, 5, 3, 4)), ShapeError);
    EXPECT_THROW(m->predict(random_window(rng, 3, 3, 6)), ShapeError);
    WindowSample bad_wind = random_window(rng, 3, 3, 4);
    bad_wind.p_hist = Tensor(num::Shape{3, 4, 3}, 0.0);
    EXPECT_THROW(m->predict(bad_wind), ShapeError);
}

TEST(AirPhyNet, SameSeedSameParameters) {
    auto a = small_model(), b = small_model();
    const auto pa = a->parameters().all();
    const auto pb = b->parameters().all();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
        EXPECT_EQ(pa[k]->name(), pb[k]->name());
        EXPECT_EQ(pa[k]->value(), pb[k]->value());
    }
}

TEST(AirPhyNet, EndToEndGradientsMatchFiniteDifferences) {
    const std::size_t n = 4, t = 3, tau = 3, d = 4;
    auto m = small_model(n, t, tau, d);
    std::mt19937_64 rng(10);
    std::vector<WindowSample> ws{random_window(rng, t, tau, n), random_window(rng, t, tau, n)};
    std::vector<const WindowSample*> batch{&ws[0], &ws[1]};
    Tensor eps = Tensor::zeros(2 * n, d);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& v : eps.values()) v = g(rng);
    auto loss = [&](num::Tape* tape) {
        const auto out = m->forward_normalized(batch, {ode::Mode::train, tape, nullptr, &eps});
        Var total = num::constant(Tensor::scalar(0.0));
        for (std::size_t k = 0; k < tau; ++k) {
            Tensor target = Tensor::zeros(2 * n, 1);
            for (std::size_t b = 0; b < 2; ++b)
                for (std::size_t i = 0; i < n; ++i)
                    target[b * n + i] = m->normalization()->normalize(ws[b].x_future(k, i));
            const Var diff = num::sub(out[k], num::constant(target));
            total = num::add(total, num::sum(num::mul(diff, diff)));
        }
        return total;
    };
    const auto report = num::finite_diff_report(m->parameters().all(), loss, 1e-6);
    ASSERT_EQ(report.size(), m->parameters().size());
    for (const auto& entry : report) EXPECT_LT(entry.relative_error, 1e-4) << entry.name;
}

TEST(ModelConfigJson, RoundTripAndUnknownKeys) {
    ModelConfig cfg = small_config(5, 7, 3);
    cfg.de.gate = physics::GateMode::advection_only;
    cfg.de.activation = physics::Activation::identity;
    const ModelConfig back = model_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    EXPECT_THROW(model_config_from_json({{"histroy", 3}}), ConfigError);
    EXPECT_THROW(model_config_from_json({{"de", {{"gate", "both"}}}}), ConfigError);
    EXPECT_THROW(model_config_from_json({{"horizon", 0}}), ConfigError);
}

// ---- checkpoint ------------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitwise) {
    auto m = small_model(5, 4, 6, 3);
    const std::string path = temp_path("roundtrip.bin");
    save_checkpoint(path, *m);
    const auto back = load_checkpoint(path, 5);
    EXPECT_EQ(to_json(back->config()), to_json(m->config()));
    EXPECT_EQ(back->normalization()->mean, 55.0);
    EXPECT_EQ(back->normalization()->std, 20.0);
    EXPECT_EQ(back->dynamics().distance_laplacian().matrix, m->dynamics().distance_laplacian().matrix);
    const auto pa = m->parameters().all();
    const auto pb = back->parameters().all();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k]->value(), pb[k]->value()) << pa[k]->name();
    std::mt19937_64 rng(11);
    const WindowSample s = random_window(rng, 4, 6, 5);
    EXPECT_EQ(back->predict(s), m->predict(s));
    std::filesystem::remove(path);
}

TEST(Checkpoint, NodeMismatchNamesLaplacian) {
    auto m = small_model();
    const std::string path = temp_path("nodes.bin");
    save_checkpoint(path, *m);
    try {
        load_checkpoint(path, 5);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("graph.laplacian"), std::string::npos) << e.what();
    }
    std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptionIsDetected) {
    auto m = small_model();
    const std::string path = temp_path("corrupt.bin");
    save_checkpoint(path, *m);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    std::string flipped = bytes;
    flipped[flipped.size() - 40] ^= 0x10;
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << flipped;
    }
    EXPECT_THROW(load_checkpoint(path), FormatError);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << bytes.substr(0, bytes.size() / 2);
    }
    EXPECT_THROW(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, NeedsNormalization) {
    AirPhyNet bare(small_config(3, 3, 4), ring_laplacian(4));
    EXPECT_THROW(save_checkpoint(temp_path("bare.bin"), bare), ConfigError);
}
