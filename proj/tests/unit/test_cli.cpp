#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "aqc/errors.hpp"
#include "aqc/evalcli/cli.hpp"
#include "aqc/physics_de/reference.hpp"

using namespace aqc;
using namespace aqc::eval;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = AQC_FIXTURE_DIR;

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "aqc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("aqc_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string at(const std::string& name) const { return (dir / name).string(); }

    fs::path dir;
};

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST(CliUsage, NoCommandIsUsageError) {
    const Outcome r = run({});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(CliUsage, UnknownCommandIsUsageError) { EXPECT_EQ(run({"frobnicate"}).code, kExitUsage); }

TEST(CliUsage, MissingRequiredOptionIsUsageError) {
    const Outcome r = run({"ingest", "--stations", "s.csv"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("--readings"), std::string::npos);
}

TEST(CliUsage, BadChoiceIsUsageError) {
    EXPECT_EQ(run({"predict", "--checkpoint", "c", "--data", "d", "--horizon", "12h", "--out", "o"}).code,
              kExitUsage);
    EXPECT_EQ(run({"baseline", "--method", "arima", "--data", "d", "--out", "o"}).code, kExitUsage);
}

TEST(CliUsage, HelpExitsZero) {
    const Outcome r = run({"--help"});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

TEST(CliUsage, MissingFileIsFailure) {
    const Outcome r = run({"predict", "--checkpoint", "/nonexistent/c.bin", "--data", "/nonexistent/d", "--horizon",
                       "24h", "--out", "/nonexistent/o.csv"});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_NE(r.err.find("/nonexistent/"), std::string::npos);
}

TEST(ExperimentConfigJson, EmptyObjectGivesDefaults) {
    const ExperimentConfig cfg = experiment_config_from_json(nlohmann::json::object());
    EXPECT_EQ(cfg.model.gru_hidden, 64u);
    EXPECT_EQ(cfg.train.batch_size, 32u);
    EXPECT_DOUBLE_EQ(cfg.train.lr0, 5e-4);
    EXPECT_FALSE(cfg.max_distance_km.has_value());
}

TEST(ExperimentConfigJson, RoundTrip) {
    ExperimentConfig cfg;
    cfg.model.gru_hidden = 12;
    cfg.model.de.latent_dim = 5;
    cfg.train.lr0 = 0.01;
    cfg.train.decay_steps = {3, 7};
    cfg.max_distance_km = 25.0;
    const ExperimentConfig back = experiment_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    EXPECT_EQ(back.max_distance_km, 25.0);
}

TEST(ExperimentConfigJson, UnknownKeysRejected) {
    EXPECT_THROW(experiment_config_from_json({{"optimizer", {}}}), ConfigError);
    EXPECT_THROW(experiment_config_from_json({{"graph", {{"radius", 3}}}}), ConfigError);
    EXPECT_THROW(experiment_config_from_json({{"train", {{"learning_rate", 3}}}}), ConfigError);
    EXPECT_THROW(experiment_config_from_json({{"graph", {{"max_distance_km", -1}}}}), ConfigError);
}

TEST_F(TempDir, ConfigFileErrors) {
    EXPECT_THROW(load_experiment_config(at("missing.json")), IoError);
    write(dir / "bad.json", "{ \"model\": ");
    EXPECT_THROW(load_experiment_config(at("bad.json")), ConfigError);
}

TEST(SeedOverride, SetsBothSeeds) {
    ExperimentConfig cfg;
    apply_seed_override(cfg, "1234");
    EXPECT_EQ(cfg.model.seed, 1234u);
    EXPECT_EQ(cfg.train.seed, 1234u);
    apply_seed_override(cfg, nullptr);
    EXPECT_EQ(cfg.model.seed, 1234u);
}

TEST(SeedOverride, RejectsNonIntegers) {
    ExperimentConfig cfg;
    EXPECT_THROW(apply_seed_override(cfg, ""), ConfigError);
    EXPECT_THROW(apply_seed_override(cfg, "-3"), ConfigError);
    EXPECT_THROW(apply_seed_override(cfg, "12x"), ConfigError);
}

TEST_F(TempDir, EvaluatePerfectForecastIsZero) {
    write(dir / "t.csv",
          "timestamp,station_id,pm25\n2014-05-01T00:00:00Z,A,60\n2014-05-01T03:00:00Z,A,90\n"
          "2014-05-01T00:00:00Z,B,10\n2014-05-01T03:00:00Z,B,12\n");
    write(dir / "p.csv",
          "timestamp,station_id,pm25_pred\n2014-05-01T00:00:00Z,A,60\n2014-05-01T00:00:00Z,B,10\n"
          "2014-05-01T03:00:00Z,B,12\n");
    const Outcome r = run({"evaluate", "--pred", at("p.csv"), "--truth", at("t.csv"), "--out", at("m.json")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("mae").get<double>(), 0.0);
    EXPECT_EQ(j.at("n_points").get<std::size_t>(), 3u);
    EXPECT_EQ(slurp(dir / "m.json"), r.out);
}

TEST_F(TempDir, EvaluateSuddenChangeSelectsJumps) {
    // A at 00:00 is 60 > 50 and rises by 30 within 3 h; B never exceeds 50.
    write(dir / "t.csv",
          "timestamp,station_id,pm25\n2014-05-01T00:00:00Z,A,60\n2014-05-01T03:00:00Z,A,90\n"
          "2014-05-01T00:00:00Z,B,10\n2014-05-01T03:00:00Z,B,45\n");
    write(dir / "p.csv",
          "timestamp,station_id,pm25_pred\n2014-05-01T00:00:00Z,A,64\n2014-05-01T03:00:00Z,A,80\n"
          "2014-05-01T00:00:00Z,B,0\n");
    const Outcome bj = run({"evaluate", "--pred", at("p.csv"), "--truth", at("t.csv"), "--sudden-change"});
    ASSERT_EQ(bj.code, kExitOk) << bj.err;
    const auto j = nlohmann::json::parse(bj.out);
    EXPECT_EQ(j.at("n_points").get<std::size_t>(), 1u);
    EXPECT_DOUBLE_EQ(j.at("mae").get<double>(), 4.0);
    // Shenzhen's 20 threshold leaves B at 10 out too; the same single point remains.
    const Outcome sz = run({"evaluate", "--pred", at("p.csv"), "--truth", at("t.csv"), "--sudden-change", "--city",
                        "shenzhen"});
    EXPECT_EQ(nlohmann::json::parse(sz.out).at("n_points").get<std::size_t>(), 1u);
}

TEST_F(TempDir, EvaluateMissingTruthIsFailure) {
    write(dir / "t.csv", "timestamp,station_id,pm25\n2014-05-01T00:00:00Z,A,60\n");
    write(dir / "p.csv", "timestamp,station_id,pm25_pred\n2014-05-01T00:00:00Z,C,60\n");
    const Outcome r = run({"evaluate", "--pred", at("p.csv"), "--truth", at("t.csv")});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_NE(r.err.find("no truth for C"), std::string::npos);
}

TEST_F(TempDir, SimulateDiffusionMatchesReference) {
    write(dir / "g.csv", "0,1,0.5\n1,0,2\n0.5,2,0\n");
    write(dir / "x0.csv", "1\n0\n3\n");
    const Outcome r = run({"simulate", "--mode", "diffusion", "--graph", at("g.csv"), "--x0", at("x0.csv"), "--t", "0.7",
                       "--k", "0.5", "--out", at("x.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const num::Tensor w = num::Tensor::matrix({{0, 1, 0.5}, {1, 0, 2}, {0.5, 2, 0}});
    const num::Tensor x0 = num::Tensor::matrix({{1}, {0}, {3}});
    const num::Tensor ref = physics::simulate_diffusion_reference(w, x0, 0.5, 0.7);
    std::ifstream in(dir / "x.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "node,value");
    for (std::size_t i = 0; i < 3; ++i) {
        ASSERT_TRUE(std::getline(in, line));
        EXPECT_EQ(line.substr(0, 2), std::to_string(i) + ",");
        EXPECT_EQ(std::stod(line.substr(2)), ref[i]);
    }
}

TEST_F(TempDir, SimulateRejectsSizeMismatch) {
    write(dir / "g.csv", "0,1\n1,0\n");
    write(dir / "x0.csv", "1\n0\n3\n");
    EXPECT_EQ(run({"simulate", "--mode", "diffusion", "--graph", at("g.csv"), "--x0", at("x0.csv"), "--t", "1",
                   "--out", at("x.csv")})
                  .code,
              kExitFailure);
}

TEST_F(TempDir, FullPipeline) {
    const std::string stations = (kFixtures / "stations.csv").string();
    const std::string readings = (kFixtures / "readings.csv").string();
    const std::string config = (kFixtures / "smoke_config.json").string();

    Outcome r = run({"ingest", "--stations", stations, "--readings", readings, "--out", at("d.aqc")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("80 steps"), std::string::npos) << r.out;

    ::unsetenv("AQC_SEED");
    r = run({"train", "--config", config, "--data", at("d.aqc"), "--out-dir", at("run1")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    r = run({"train", "--config", config, "--data", at("d.aqc"), "--out-dir", at("run2")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(slurp(dir / "run1/checkpoint.bin"), slurp(dir / "run2/checkpoint.bin"));
    EXPECT_EQ(slurp(dir / "run1/train_log.csv"), slurp(dir / "run2/train_log.csv"));
    EXPECT_EQ(line_count(dir / "run1/train_log.csv"), 3u);  // header and two epochs
    EXPECT_EQ(load_experiment_config(at("run1/config.json")).train.max_epochs, 2u);

    ::setenv("AQC_SEED", "99", 1);
    r = run({"train", "--config", config, "--data", at("d.aqc"), "--out-dir", at("run3")});
    ::unsetenv("AQC_SEED");
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(slurp(dir / "run1/checkpoint.bin"), slurp(dir / "run3/checkpoint.bin"));
    EXPECT_EQ(load_experiment_config(at("run3/config.json")).model.seed, 99u);

    // 80 steps give 33 windows; 7:1:2 leaves 7 test windows.
    r = run({"predict", "--checkpoint", at("run1/checkpoint.bin"), "--data", at("d.aqc"), "--horizon", "48h", "--out",
             at("p.csv"), "--truth-out", at("t.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(line_count(dir / "p.csv"), 1u + 7u * 16u * 6u);
    EXPECT_EQ(line_count(dir / "t.csv"), 1u + 80u * 6u);

    r = run({"evaluate", "--pred", at("p.csv"), "--truth", at("t.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const double mae = nlohmann::json::parse(r.out).at("mae").get<double>();
    EXPECT_GT(mae, 0.0);
    EXPECT_TRUE(std::isfinite(mae));

    for (const std::string method : {"ha", "var"}) {
        r = run({"baseline", "--method", method, "--data", at("d.aqc"), "--out", at(method + ".csv")});
        ASSERT_EQ(r.code, kExitOk) << r.err;
        EXPECT_EQ(line_count(dir / (method + ".csv")), 1u + 7u * 24u * 6u);
        r = run({"evaluate", "--pred", at(method + ".csv"), "--truth", at("t.csv")});
        ASSERT_EQ(r.code, kExitOk) << r.err;
    }

    r = run({"plot", "--type", "wind-heatmap", "--data", at("d.aqc"), "--out", at("w.svg")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(slurp(dir / "w.svg").find("<svg "), std::string::npos);
    r = run({"plot", "--type", "diffusion-lines", "--data", at("d.aqc"), "--checkpoint", at("run1/checkpoint.bin"),
             "--source", "A01", "--out", at("l.svg")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    r = run({"plot", "--type", "diffusion-lines", "--data", at("d.aqc"), "--out", at("l2.svg")});
    EXPECT_EQ(r.code, kExitUsage);
    r = run({"plot", "--type", "diffusion-lines", "--data", at("d.aqc"), "--source", "ZZZ", "--out", at("l3.svg")});
    EXPECT_EQ(r.code, kExitFailure);
}
