#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "aqc/errors.hpp"
#include "aqc/geo_graph/graph.hpp"
#include "aqc/ode/ode_solve.hpp"
#include "aqc/ode/solvers.hpp"

using namespace aqc;
using namespace aqc::ode;
using num::Tensor;
using num::Var;

namespace {

const double kInvE = std::exp(-1.0);

Tensor linear_rhs(const Tensor& a, const Tensor& z) { return num::matmul(a, z); }

Eigen::MatrixXd to_eigen(const Tensor& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

Tensor random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Tensor m = Tensor::zeros(r, c);
    for (double& x : m.values()) x = g(rng);
    return m;
}

double exp_decay_error(Method method, int substeps) {
    const auto states = fixed_step_integrate([](double, const Var& z) { return num::neg(z); },
                                             num::constant(Tensor::scalar(1.0)), TimeGrid::uniform(1),
                                             method, substeps);
    return std::abs(states.back().value().item() - kInvE);
}

double fitted_slope(Method method) {
    // Least-squares slope of log(error) against log(h).
    std::vector<double> xs, ys;
    for (int n : {8, 16, 32, 64}) {
        xs.push_back(std::log(1.0 / n));
        ys.push_back(std::log(exp_decay_error(method, n)));
    }
    const double mx = (xs[0] + xs[1] + xs[2] + xs[3]) / 4.0, my = (ys[0] + ys[1] + ys[2] + ys[3]) / 4.0;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 4; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

TEST(Dopri5, ExponentialDecay) {
    auto decay = [](double, const Tensor& z) { Tensor d = z; d *= -1.0; return d; };
    // Default tolerances bound the error by the tolerance, not by 1e-6.
    const auto loose = dopri5_integrate(decay, Tensor::scalar(1.0), TimeGrid::uniform(1), SolverConfig{});
    ASSERT_EQ(loose.size(), 1u);
    EXPECT_NEAR(loose[0].item(), kInvE, 2e-5);

    SolverConfig tight;
    tight.rtol = tight.atol = 1e-8;
    const auto states = dopri5_integrate(decay, Tensor::scalar(1.0), TimeGrid::uniform(1), tight);
    EXPECT_NEAR(states[0].item(), 0.3678794, 1e-6);
    EXPECT_NEAR(states[0].item(), kInvE, 1e-6);
}

TEST(Dopri5, LinearSystemMatchesMatrixExponential) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor a = random_matrix(rng, 3, 3);
        const Tensor z0 = random_matrix(rng, 3, 1);
        const auto states =
            dopri5_integrate([&](double, const Tensor& z) { return linear_rhs(a, z); }, z0,
                             TimeGrid::uniform(1), SolverConfig{});
        const Eigen::VectorXd oracle = to_eigen(a).exp() * to_eigen(z0);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(states[0][i], oracle(i), 1e-5);
    }
}

TEST(Dopri5, ZeroFieldKeepsStateAndTakesFewSteps) {
    const Tensor z0 = Tensor::matrix({{1.5, -2.0}, {0.25, 3.0}});
    auto zero = [](double, const Tensor& z) { return Tensor(z.shape(), 0.0); };
    Dopri5Stats stats;
    const auto states = dopri5_integrate(zero, z0, TimeGrid::uniform(4), SolverConfig{}, &stats);
    for (const auto& s : states) EXPECT_EQ(s, z0);
    // From h_init = 0.1 the first interval needs one growth step; afterwards
    // each interval is a single clipped step.
    EXPECT_EQ(stats.accepted_per_interval, (std::vector<int>{2, 1, 1, 1}));
    EXPECT_EQ(stats.rejected, 0);

    SolverConfig unit;
    unit.h_init = 1.0;
    dopri5_integrate(zero, z0, TimeGrid::uniform(4), unit, &stats);
    EXPECT_EQ(stats.accepted_per_interval, (std::vector<int>{1, 1, 1, 1}));
}

TEST(Dopri5, LandsExactlyOnGridTimes) {
    std::vector<double> seen;
    dopri5_integrate(
        [&](double t, const Tensor& z) {
            seen.push_back(t);
            Tensor d = z;
            d *= -1.0;
            return d;
        },
        Tensor::scalar(1.0), TimeGrid({0.0, 0.3, 1.7, 2.0}), SolverConfig{});
    for (double g : {0.3, 1.7, 2.0}) EXPECT_NE(std::find(seen.begin(), seen.end(), g), seen.end()) << g;
}

TEST(Dopri5, ToleranceScaling) {
    std::mt19937_64 rng(12);
    const Tensor a = random_matrix(rng, 3, 3);
    const Tensor z0 = random_matrix(rng, 3, 1);
    const Eigen::VectorXd oracle = to_eigen(a).exp() * to_eigen(z0);
    auto error_at = [&](double tol) {
        SolverConfig cfg;
        cfg.rtol = cfg.atol = tol;
        const auto s = dopri5_integrate([&](double, const Tensor& z) { return linear_rhs(a, z); }, z0,
                                        TimeGrid::uniform(1), cfg);
        double err = 0.0;
        for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(s[0][i] - oracle(i)));
        return err;
    };
    const double e5 = error_at(1e-5), e7 = error_at(1e-7);
    EXPECT_LE(e5, 100.0 * 2e-5);
    EXPECT_LE(e7, 100.0 * 2e-7);
    EXPECT_GE(e5 / e7, 10.0);
}

TEST(Dopri5, MaxStepsReportsTimeAndStep) {
    SolverConfig cfg;
    cfg.max_steps = 3;
    try {
        dopri5_integrate([](double, const Tensor& z) { Tensor d = z; d *= -50.0; return d; },
                         Tensor::scalar(1.0), TimeGrid::uniform(10), cfg);
        FAIL();
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("t = "), std::string::npos);
        EXPECT_NE(msg.find("h = "), std::string::npos);
    }
}

TEST(Dopri5, RejectsBadConfig) {
    SolverConfig cfg;
    cfg.rtol = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = SolverConfig{};
    cfg.factor_min = 1.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(TimeGrid({0.0, 1.0, 1.0}), ConfigError);
    EXPECT_THROW(TimeGrid({0.5, 1.0}), ConfigError);
}

TEST(FixedStep, Examples) {
    EXPECT_EQ(exp_decay_error(Method::euler, 1), kInvE);  // 1 + 1 * (-1) = 0
    EXPECT_LT(exp_decay_error(Method::rk4, 2), 3e-4);

    const Var z0 = num::constant(Tensor::matrix({{1, 2}, {3, 4}}));
    const auto states = fixed_step_integrate(
        [](double, const Var& z) { return num::constant(Tensor(z.shape(), 0.0)); }, z0, TimeGrid::uniform(3),
        Method::rk4, 2);
    ASSERT_EQ(states.size(), 3u);
    for (const auto& s : states) EXPECT_EQ(s.value(), z0.value());
}

TEST(FixedStep, ConvergenceOrders) {
    EXPECT_NEAR(fitted_slope(Method::euler), 1.0, 0.1);
    EXPECT_NEAR(fitted_slope(Method::rk4), 4.0, 0.2);
}

TEST(FixedStep, NonFiniteStateNamesStep) {
    try {
        fixed_step_integrate([](double, const Var& z) { return num::affine(z, 1e200); },
                             num::constant(Tensor::scalar(1e200)), TimeGrid::uniform(3), Method::euler, 1);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
    }
}

TEST(FixedStep, RejectsBadArguments) {
    auto f = [](double, const Var& z) { return z; };
    const Var z0 = num::constant(Tensor::scalar(1.0));
    EXPECT_THROW(fixed_step_integrate(f, z0, TimeGrid::uniform(1), Method::rk4, 0), ConfigError);
    EXPECT_THROW(fixed_step_integrate(f, z0, TimeGrid::uniform(1), Method::dopri5, 1), ConfigError);
}

// ---- ode_solve on the learned dynamics ----------------------------------------

namespace {

struct ToyDE {
    num::ParameterStore store;
    std::unique_ptr<physics::DEFunction> de;
    Tensor wind;

    ToyDE(std::size_t n, std::size_t d, std::uint64_t seed) {
        num::Rng rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Tensor w = Tensor::zeros(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = 0.2 + u(rng);
        physics::DEConfig cfg;
        cfg.latent_dim = d;
        de = std::make_unique<physics::DEFunction>(store, cfg,
                                                    geo::scaled_laplacian(w, geo::LaplacianSource::distance), rng);
        wind = Tensor::zeros(n, 2);
        std::normal_distribution<double> g(0.0, 2.0);
        for (double& x : wind.values()) x = g(rng);
    }
};

}  // namespace

TEST(OdeSolve, ZeroModelFromZeroStateStaysZero) {
    ToyDE toy(4, 3, 21);
    for (auto* p : toy.store.all())
        if (p->name() != "de.k_raw") p->value() *= 0.0;
    auto bound = toy.de->bind(nullptr);
    bound.with_wind(num::constant(toy.wind));
    const Var z0 = num::constant(Tensor::zeros(4, 3));
    for (Mode mode : {Mode::train, Mode::infer}) {
        const auto traj = ode_solve(bound, z0, TimeGrid::uniform(5), SolverConfig{}, mode);
        ASSERT_EQ(traj.size(), 5u);
        for (const auto& s : traj) {
            EXPECT_EQ(s.shape(), (num::Shape{4, 3}));
            EXPECT_EQ(s.value(), z0.value());
        }
    }
}

TEST(OdeSolve, TrainAndInferAgree) {
    ToyDE toy(5, 4, 22);
    auto bound = toy.de->bind(nullptr);
    bound.with_wind(num::constant(toy.wind));
    std::mt19937_64 rng(23);
    const Var z0 = num::constant(random_matrix(rng, 5, 4, 0.5));
    const auto grid = TimeGrid::uniform(6);
    const auto a = ode_solve(bound, z0, grid, SolverConfig{}, Mode::train);
    const auto b = ode_solve(bound, z0, grid, SolverConfig{}, Mode::infer);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(num::max_abs_diff(a[i].value(), b[i].value()), 1e-3);
}

TEST(OdeSolve, InferHonoursFixedStepMethod) {
    ToyDE toy(4, 3, 24);
    auto bound = toy.de->bind(nullptr);
    bound.with_wind(num::constant(toy.wind));
    std::mt19937_64 rng(25);
    const Var z0 = num::constant(random_matrix(rng, 4, 3, 0.5));
    const auto grid = TimeGrid::uniform(4);
    SolverConfig rk4;
    rk4.method = Method::rk4;
    const auto a = ode_solve(bound, z0, grid, SolverConfig{}, Mode::train);
    const auto b = ode_solve(bound, z0, grid, rk4, Mode::infer);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value(), b[i].value());
    SolverConfig euler;
    euler.method = Method::euler;
    euler.substeps = 1;
    const auto c = ode_solve(bound, z0, TimeGrid::uniform(1), euler, Mode::infer);
    // One Euler step: z0 + f(0, z0).
    Tensor want = z0.value();
    want += bound(0.0, z0).value();
    EXPECT_EQ(c[0].value(), want);
}

namespace {

std::vector<num::GradCheckEntry> rk4_gradient_report(ToyDE& toy, std::uint64_t seed) {
    const std::size_t n = toy.wind.rows();
    std::mt19937_64 rng(seed);
    const Tensor z0 = random_matrix(rng, n, 2, 0.7);
    const Tensor target = random_matrix(rng, n, 2, 0.7);
    auto loss = [&](num::Tape* tape) {
        auto bound = toy.de->bind(tape);
        bound.with_wind(num::constant(toy.wind));
        const auto traj = ode_solve(bound, num::constant(z0), TimeGrid::uniform(3), SolverConfig{}, Mode::train);
        Var total = num::constant(Tensor::scalar(0.0));
        for (const auto& s : traj) {
            const Var diff = num::sub(s, num::constant(target));
            total = num::add(total, num::sum(num::mul(diff, diff)));
        }
        return total;
    };
    return num::finite_diff_report(toy.store.all(), loss, 1e-6);
}

}  // namespace

TEST(OdeSolve, GradientsThroughRk4TwoNodes) {
    // With two nodes the normalized flow-field adjacency is sign(p1 - p2)
    // off the diagonal, so the flow network receives no gradient at all.
    ToyDE toy(2, 2, 24);
    const auto report = rk4_gradient_report(toy, 25);
    for (const auto& entry : report) {
        if (entry.name.rfind("de.flow.", 0) == 0) continue;
        EXPECT_LT(entry.relative_error, 1e-4) << entry.name;
    }
    num::Tape tape;
    auto bound = toy.de->bind(&tape);
    bound.with_wind(num::constant(toy.wind));
    const auto traj = ode_solve(bound, num::constant(Tensor(num::Shape{2, 2}, 0.3)), TimeGrid::uniform(2),
                                SolverConfig{}, Mode::train);
    toy.store.zero_grad();
    tape.backward(num::sum(num::mul(traj.back(), traj.back())));
    for (auto* p : toy.store.all()) {
        if (p->name().rfind("de.flow.", 0) != 0) continue;
        for (double g : p->grad().values()) EXPECT_LT(std::abs(g), 1e-12) << p->name();
    }
}

TEST(OdeSolve, GradientsThroughRk4MatchFiniteDifferences) {
    ToyDE toy(3, 2, 26);
    for (const auto& entry : rk4_gradient_report(toy, 27)) EXPECT_LT(entry.relative_error, 1e-4) << entry.name;
}
