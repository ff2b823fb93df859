#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "deem/analysis.hpp"
#include "deem/datasets.hpp"
#include "deem/serialization.hpp"
#include "deem/trainer.hpp"

using namespace deem;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Invocation {
  int code;
  std::string out, err;
};

Invocation deem_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json manifest(const fs::path& p) {
  json j = json::parse(slurp(p));
  j.erase("duration_seconds");
  return j;
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("DEEM_SEED");
    dir_ = fs::temp_directory_path() / ("deem_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    unsetenv("DEEM_SEED");
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string cond_ind(std::size_t n = 1500, const std::string& name = "data.csv") {
    const Invocation r = deem_cli({"generate", "--kind", "cond_ind", "--n", std::to_string(n), "--seed", "3", "--out", path(name)});
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name);
  }

  fs::path dir_;
};

TEST_F(Cli, GenerateEveryKindIsLoadableAndDeterministic) {
  for (const char* kind : {"cond_ind", "tree3k", "amp_data"}) {
    std::vector<std::string> data, params;
    std::vector<json> manifests;
    for (int rep = 0; rep < 2; ++rep) {
      const Invocation r = deem_cli({"generate", "--kind", kind, "--n", "200", "--seed", "9", "--out", path("g.csv")});
      ASSERT_EQ(r.code, 0) << r.err;
      data.push_back(slurp(path("g.csv")));
      params.push_back(slurp(path("g.params.json")));
      manifests.push_back(manifest(path("g.manifest.json")));
    }
    const PredictionTable t = load_predictions_csv(path("g.csv"));
    EXPECT_EQ(t.labels.samples(), 200u);
    EXPECT_TRUE(t.truth.has_value());
    EXPECT_EQ(data[0], data[1]) << kind;
    EXPECT_EQ(params[0], params[1]) << kind;
    EXPECT_EQ(manifests[0], manifests[1]) << kind;
    EXPECT_EQ(manifests[0]["seed"], 9);
    EXPECT_EQ(manifests[0]["command"], "generate");
  }
  EXPECT_TRUE(fs::exists(path("g.expert.csv")));
  EXPECT_EQ(load_mask_csv(path("g.expert.csv")).size(), 200u);
}

TEST_F(Cli, CondIndSidecarHoldsGeneratingParameters) {
  cond_ind(100);
  const json side = json::parse(slurp(path("data.params.json")));
  const DsParams p = ds_params_from_json(side["ds_params"].dump());
  const CondIndData g = gen_cond_ind(100, 3);
  EXPECT_EQ(p.psi_data(), g.params.psi_data());
}

TEST_F(Cli, TrainWritesArtifactsAndIsByteDeterministic) {
  const std::string data = cond_ind();
  for (const char* out : {"m1.json", "m2.json"}) {
    const Invocation r = deem_cli({"train", "--data", data, "--epochs", "4", "--num-layers", "1", "--seed", "5",
                            "--batch-size", "256", "--model-out", path(out)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(path("m1.json")), slurp(path("m2.json")));
  EXPECT_EQ(slurp(path("m1.trace.csv")), slurp(path("m2.trace.csv")));
  EXPECT_EQ(line_count(path("m1.trace.csv")), 1u + 1u + 4u);
  EXPECT_TRUE(fs::exists(path("m1.dead_units.json")));
  json m = manifest(path("m1.manifest.json"));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["config"]["epochs"], 4);
  EXPECT_EQ(m["config"]["num_layers"], 1);
  EXPECT_TRUE(json::parse(slurp(path("m1.manifest.json"))).contains("duration_seconds"));
  EXPECT_TRUE(m.contains("version"));
  const LoadedModel loaded = deem_model_from_json(slurp(path("m1.json")));
  EXPECT_EQ(loaded.model.layers.size(), 1u);
  EXPECT_TRUE(loaded.model.class_map.has_value());
}

TEST_F(Cli, ZeroLayersGivesIrbmOnlyModel) {
  const std::string data = cond_ind();
  ASSERT_EQ(deem_cli({"train", "--data", data, "--epochs", "2", "--num-layers", "0", "--model-out", path("m.json")}).code, 0);
  EXPECT_TRUE(deem_model_from_json(slurp(path("m.json"))).model.layers.empty());
}

TEST_F(Cli, InferMatchesInProcessAndHandlesUnseenRows) {
  const std::string data = cond_ind(3000);
  ASSERT_EQ(deem_cli({"train", "--data", data, "--epochs", "20", "--num-layers", "0", "--learning-rate", "0.2",
                      "--model-out", path("m.json")})
                .code,
            0);
  const Invocation r = deem_cli({"infer", "--model", path("m.json"), "--data", data, "--out", path("pred.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const LoadedModel loaded = deem_model_from_json(slurp(path("m.json")));
  const PredictionTable t = load_predictions_csv(data, 3);
  const LabelVector expected = infer(loaded.model, encode_one_hot(t.labels));
  EXPECT_EQ(load_labels_csv(path("pred.csv"), 3), expected);
  EXPECT_GE(accuracy(expected, *t.truth), accuracy(majority_vote(t.labels), *t.truth));

  // unseen rows of the same shape
  const std::string fresh = cond_ind(50, "fresh.csv");
  EXPECT_EQ(deem_cli({"infer", "--model", path("m.json"), "--data", fresh, "--out", path("fresh_pred.csv")}).code, 0);
  EXPECT_EQ(load_labels_csv(path("fresh_pred.csv")).size(), 50u);
}

TEST_F(Cli, InferWithoutClassMapIsUsageError) {
  const std::string data = cond_ind(100);
  RunConfig config;
  const DeemModel model = make_model(3, 10, config);
  write_text_file_atomic(path("unfitted.json"), to_json(model, config));
  const Invocation r = deem_cli({"infer", "--model", path("unfitted.json"), "--data", data, "--out", path("p.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST_F(Cli, InferRejectsShapeMismatch) {
  const std::string data = cond_ind(200);
  ASSERT_EQ(deem_cli({"train", "--data", data, "--epochs", "1", "--model-out", path("m.json")}).code, 0);
  ASSERT_EQ(deem_cli({"generate", "--kind", "tree3k", "--n", "20", "--out", path("t.csv")}).code, 0);
  EXPECT_EQ(deem_cli({"infer", "--model", path("m.json"), "--data", path("t.csv"), "--out", path("p.csv")}).code, 2);
}

TEST_F(Cli, CorruptCsvReportsLocation) {
  std::ofstream(path("bad.csv")) << "clf_1,clf_2\n1,2\n2,x\n";
  const Invocation r = deem_cli({"train", "--data", path("bad.csv"), "--model-out", path("m.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("row 3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("column 2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(Cli, DivergenceExitsThreeAndKeepsPartialTrace) {
  const std::string data = cond_ind(300);
  const Invocation r = deem_cli({"train", "--data", data, "--learning-rate", "1e308", "--epochs", "3", "--model-out", path("m.json")});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_TRUE(fs::exists(path("m.trace.csv")));
  EXPECT_FALSE(fs::exists(path("m.json")));
  EXPECT_EQ(manifest(path("m.manifest.json"))["status"], "diverged");
}

TEST_F(Cli, ConfigPrecedenceCliOverJsonOverEnvOverDefaults) {
  const std::string data = cond_ind(200);
  std::ofstream(path("c.json")) << R"({"epochs": 3, "learning_rate": 0.01, "seed": 21})";
  auto train_with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"train", "--data", data, "--model-out", path("m.json")};
    args.insert(args.end(), extra.begin(), extra.end());
    EXPECT_EQ(deem_cli(args).code, 0);
    return manifest(path("m.manifest.json"));
  };

  json m = train_with({"--epochs", "1"});
  EXPECT_EQ(m["seed"], 0);
  EXPECT_EQ(m["config"]["learning_rate"], RunConfig{}.learning_rate);

  setenv("DEEM_SEED", "17", 1);
  m = train_with({"--epochs", "1"});
  EXPECT_EQ(m["seed"], 17);

  m = train_with({"--config", path("c.json")});
  EXPECT_EQ(m["seed"], 21);
  EXPECT_EQ(m["config"]["epochs"], 3);
  EXPECT_EQ(m["config"]["learning_rate"], 0.01);

  m = train_with({"--config", path("c.json"), "--epochs", "2", "--seed", "4"});
  EXPECT_EQ(m["seed"], 4);
  EXPECT_EQ(m["config"]["epochs"], 2);
  EXPECT_EQ(m["config"]["learning_rate"], 0.01);
}

TEST_F(Cli, BadSeedEnvironmentIsUsageError) {
  const std::string data = cond_ind(100);
  setenv("DEEM_SEED", "abc", 1);
  EXPECT_EQ(deem_cli({"train", "--data", data, "--model-out", path("m.json")}).code, 2);
}

TEST_F(Cli, UnknownConfigKeyIsUsageError) {
  const std::string data = cond_ind(100);
  std::ofstream(path("c.json")) << R"({"epoch": 3})";
  EXPECT_EQ(deem_cli({"train", "--data", data, "--config", path("c.json"), "--model-out", path("m.json")}).code, 2);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(deem_cli({}).code, 2);
  EXPECT_EQ(deem_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(deem_cli({"train"}).code, 2);
  EXPECT_EQ(deem_cli({"generate", "--kind", "nope", "--n", "5", "--out", path("x.csv")}).code, 2);
  EXPECT_EQ(deem_cli({"train", "--data", path("missing.csv"), "--model-out", path("m.json")}).code, 2);
  const Invocation help = deem_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("lr-sweep"), std::string::npos);
  const std::string data = cond_ind(100);
  EXPECT_EQ(deem_cli({"train", "--data", data, "--epochs", "0", "--model-out", path("m.json")}).code, 2);
  EXPECT_EQ(deem_cli({"train", "--data", data, "--batch-size", "many", "--model-out", path("m.json")}).code, 2);
}

TEST_F(Cli, EvalMetrics) {
  std::ofstream(path("truth.csv")) << "label\n1\n2\n3\n1\n";
  std::ofstream(path("same.csv")) << "label\n1\n2\n3\n1\n";
  std::ofstream(path("half.csv")) << "label\n1\n2\n1\n2\n";
  std::ofstream(path("ens.csv")) << "clf_1,clf_2\n1,1\n2,2\n1,2\n3,3\n";
  std::ofstream(path("mask.csv")) << "expert\n1\n1\n0\n0\n";

  Invocation r = deem_cli({"eval", "--pred", path("same.csv"), "--truth", path("truth.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["accuracy"], 1.0);

  r = deem_cli({"eval", "--pred", path("half.csv"), "--truth", path("truth.csv"), "--ensemble", path("ens.csv"),
                "--mask", path("mask.csv"), "--compare", "--out", path("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(slurp(path("report.json")));
  EXPECT_EQ(report["accuracy"], 0.5);
  // no member is right on rows 3 and 4, so quality keeps rows 1 and 2
  EXPECT_EQ(report["accuracy_quality"]["subset_size"], 2);
  EXPECT_EQ(report["accuracy_quality"]["value"], 1.0);
  EXPECT_EQ(report["expert"]["value"], 1.0);
  EXPECT_EQ(report["remaining"]["value"], 0.0);
  EXPECT_TRUE(report["comparison"].contains("majority_vote"));
  EXPECT_TRUE(report["comparison"].contains("ds_em"));
  EXPECT_TRUE(fs::exists(path("report.manifest.json")));

  EXPECT_EQ(deem_cli({"eval", "--pred", path("half.csv"), "--truth", path("truth.csv"), "--compare"}).code, 2);
}

TEST_F(Cli, AnalyzeWritesReportsAndRecoveryOnlyWithSidecar) {
  const std::string data = cond_ind(2000);
  ASSERT_EQ(deem_cli({"train", "--data", data, "--epochs", "3", "--num-layers", "2", "--model-out", path("m.json")}).code, 0);
  Invocation r = deem_cli({"analyze", "--model", path("m.json"), "--data", data, "--truth", data, "--out-dir", path("plain")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("plain/mi_report.json")));
  EXPECT_TRUE(fs::exists(path("plain/importance.csv")));
  EXPECT_FALSE(fs::exists(path("plain/recovery.csv")));
  EXPECT_TRUE(json::parse(slurp(path("plain/summary.json")))["recovery"].is_null());
  EXPECT_EQ(json::parse(slurp(path("plain/mi_report.json")))["layers"].size(), 3u);
  EXPECT_EQ(line_count(path("plain/importance.csv")), 11u);

  r = deem_cli({"analyze", "--model", path("m.json"), "--data", data, "--truth", data, "--params",
                path("data.params.json"), "--out-dir", path("full")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("full/recovery.csv")));
  EXPECT_EQ(line_count(path("full/recovery.csv")), 1u + 10u * 9u + 3u);
  EXPECT_TRUE(json::parse(slurp(path("full/summary.json")))["recovery"].contains("correlation"));
  EXPECT_EQ(json::parse(slurp(path("full/manifest.json")))["command"], "analyze");
}

TEST_F(Cli, LrSweepSharesInitialization) {
  const std::string data = cond_ind(600);
  const Invocation r = deem_cli({"lr-sweep", "--data", data, "--lrs", "0,0.05", "--epochs", "4", "--out-dir", path("sweep")});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(path("sweep/trace_1.csv")));
  ASSERT_TRUE(fs::exists(path("sweep/trace_2.csv")));
  const json sweep = json::parse(slurp(path("sweep/sweep.json")));
  ASSERT_EQ(sweep["trials"].size(), 2u);
  EXPECT_EQ(sweep["trials"][0]["stable"], true);
  EXPECT_EQ(sweep["trials"][0]["initial_difference"], sweep["trials"][1]["initial_difference"]);

  std::istringstream lines(slurp(path("sweep/trace_1.csv")));
  std::string header, row, first_positive;
  std::getline(lines, header);
  std::size_t rows = 0;
  while (std::getline(lines, row)) {
    const std::string positive = row.substr(row.find(',') + 1, row.find(',', row.find(',') + 1) - row.find(',') - 1);
    if (rows++ == 0) first_positive = positive;
    EXPECT_EQ(positive, first_positive);
  }
  EXPECT_EQ(rows, 5u);
  const std::string head1 = slurp(path("sweep/trace_1.csv")), head2 = slurp(path("sweep/trace_2.csv"));
  EXPECT_EQ(head1.substr(0, head1.find('\n', header.size() + 1)), head2.substr(0, head2.find('\n', header.size() + 1)));
}

TEST_F(Cli, InjectExpert) {
  const std::string data = cond_ind(500);
  const Invocation r =
      deem_cli({"inject-expert", "--data", data, "--column", "7", "--classes", "1,3", "--out", path("injected.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const PredictionTable before = load_predictions_csv(data, 3), after = load_predictions_csv(path("injected.csv"), 3);
  ASSERT_TRUE(after.truth);
  for (std::size_t s = 0; s < 500; ++s) {
    const int y = (*after.truth)[s];
    if (y == 0 || y == 2) {
      EXPECT_EQ(after.labels(s, 6), y);
    }
    for (std::size_t i = 0; i < 10; ++i)
      if (i != 6) EXPECT_EQ(after.labels(s, i), before.labels(s, i));
  }
  EXPECT_EQ(deem_cli({"inject-expert", "--data", data, "--column", "7", "--classes", "4", "--out", path("x.csv")}).code, 2);
}

TEST_F(Cli, BinaryPropagatesExitCodes) {
  const std::string bin = DEEM_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(bin + " --version"), 0);
  EXPECT_EQ(status(bin + " bogus"), 2);
  EXPECT_EQ(status(bin + " generate --kind cond_ind --n 300 --out " + path("t.csv")), 0);
  EXPECT_EQ(status("DEEM_SEED=8 " + bin + " generate --kind tree3k --n 30 --out " + path("t8.csv")), 0);
  EXPECT_EQ(manifest(path("t8.manifest.json"))["seed"], 8);
  EXPECT_EQ(status(bin + " train --data " + path("t.csv") + " --learning-rate 1e308 --model-out " + path("m.json")), 3);
}

}  // namespace
