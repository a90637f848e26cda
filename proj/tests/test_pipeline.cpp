#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "zrs/pipeline/pipeline.hpp"

using namespace zrs;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_json() {
  return nlohmann::json::parse(R"({
    "seed": 1,
    "variant": "baseline",
    "synth": {"num_languages": 2, "num_speakers_per_language": 2, "num_phones": 3,
              "num_utterances": 24, "feature_dim": 4},
    "fhvae": {"kind": "dense", "hidden_dim": 16, "num_layers": 1, "z1_dim": 4, "z2_dim": 4,
              "segment_length": 4, "batch_size": 32, "max_epochs": 2,
              "segments_per_epoch": 200},
    "dpgmm": {"iterations": 5},
    "bnf": {"hidden_dims": [16], "post_bottleneck_dim": 16, "bottleneck_dim": 8,
            "epochs": 1, "batch_size": 64},
    "abx": {"max_per_cell": 2}
  })");
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("zrs-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentConfig tiny_config(const fs::path& workdir, Variant v) {
  auto c = tiny_json().get<ExperimentConfig>();
  c.workdir = workdir.string();
  c.variant = v;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("ZRS_CLI");
  if (!cli) return -1;
  const std::string cmd = std::string(cli) + " --log-level error " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Variants, WiringTable) {
  struct Row {
    const char* name;
    const char* cluster;
    const char* bnf;
    bool fhvae;
  };
  for (const auto& r : {Row{"baseline", "raw", "raw", false}, Row{"z1-orig", "raw", "z1", true},
                        Row{"xt-orig", "raw", "xt", true}, Row{"z1-xhat", "xhat", "z1", true},
                        Row{"xt-xhat", "xhat", "xt", true}}) {
    const auto v = variant_from_string(r.name);
    EXPECT_EQ(to_string(v), r.name);
    EXPECT_EQ(cluster_input(v), r.cluster);
    EXPECT_EQ(bnf_input(v), r.bnf);
    EXPECT_EQ(needs_fhvae(v), r.fhvae);
  }
  EXPECT_THROW(variant_from_string("z2-xhat"), ConfigError);
}

TEST(Config, DpgmmPresets) {
  EXPECT_EQ(dpgmm_preset("zs17-raw"), (std::vector<int>{120, 200, 3000}));
  EXPECT_EQ(dpgmm_preset("zs17-recon"), (std::vector<int>{80, 80, 1400}));
  EXPECT_THROW(dpgmm_preset("fast"), ConfigError);
}

TEST(Config, OverridesParseJsonOrString) {
  auto doc = nlohmann::json(ExperimentConfig{});
  apply_override(doc, "fhvae.alpha=5");
  apply_override(doc, "variant=z1-xhat");
  apply_override(doc, "bnf.hidden_dims=[8,8]");
  const auto c = doc.get<ExperimentConfig>();
  EXPECT_EQ(c.fhvae.alpha, 5.0);
  EXPECT_EQ(c.variant, Variant::kZ1Xhat);
  EXPECT_EQ(c.bnf.hidden_dims, (std::vector<int>{8, 8}));
  EXPECT_THROW(apply_override(doc, "fhvae.nonexistent=1"), ConfigError);
  EXPECT_THROW(apply_override(doc, "no-equals-sign"), ConfigError);
}

TEST(Config, LoadFileThenOverrides) {
  const auto dir = fresh_dir("load");
  const auto path = (dir / "c.json").string();
  std::ofstream(path) << tiny_json().dump();
  const auto c = load_experiment_config(path, {"dpgmm.iterations=7"});
  EXPECT_EQ(c.synth.num_phones, 3);
  EXPECT_EQ(c.dpgmm.iterations, 7);
  EXPECT_THROW(load_experiment_config((dir / "missing.json").string(), {}), ConfigError);
  std::ofstream(path) << "[1, 2]";
  EXPECT_THROW(load_experiment_config(path, {}), ConfigError);
  EXPECT_THROW(load_experiment_config("", {"test_fraction=1.5"}), ConfigError);
  fs::remove_all(dir);
}

TEST(Config, DerivedSeedsDifferPerStage) {
  ExperimentConfig c;
  c.seed = 11;
  const auto d = c.with_derived_seeds();
  EXPECT_NE(d.fhvae.seed, d.dpgmm.seed);
  EXPECT_NE(d.dpgmm.seed, d.bnf.seed);
  EXPECT_EQ(d.fhvae.seed, c.with_derived_seeds().fhvae.seed);
  c.seed = 12;
  EXPECT_NE(d.fhvae.seed, c.with_derived_seeds().fhvae.seed);
}

TEST(Stages, ProduceFailureBecomesStageError) {
  const auto dir = fresh_dir("stage");
  StageRunner runner(dir);
  try {
    runner.run("broken", {}, {}, [](const fs::path&) { throw Error("boom"); });
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "broken");
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Pipeline, BaselineHasNoFhvaeAndCachesSecondRun) {
  const auto dir = fresh_dir("baseline");
  const auto cfg = tiny_config(dir, Variant::kBaseline);
  const auto first = run_pipeline(cfg);
  for (const auto& s : first.stages) EXPECT_EQ(s.name.find("fhvae"), std::string::npos);
  EXPECT_FALSE(first.all_cache_hits());
  const auto report = read_file(first.report_path);
  ASSERT_FALSE(report.empty());

  const auto second = run_pipeline(cfg);
  EXPECT_TRUE(second.all_cache_hits());
  EXPECT_EQ(read_file(second.report_path), report);
  EXPECT_TRUE(fs::exists(dir / "run-baseline.json"));
  fs::remove_all(dir);
}

TEST(Pipeline, Z1XhatWiring) {
  const auto dir = fresh_dir("wiring");
  const auto m = run_pipeline(tiny_config(dir, Variant::kZ1Xhat));
  const auto& cluster = m.stage("cluster");
  const auto& bnf = m.stage("bnf");
  EXPECT_EQ(cluster.inputs.count("extract-xhat/train.zrfa"), 1u);
  EXPECT_EQ(cluster.inputs.count("features/train.zrfa"), 0u);
  EXPECT_EQ(bnf.inputs.count("extract-z1/train.zrfa"), 1u);
  EXPECT_EQ(cluster.inputs.at("extract-xhat/train.zrfa"),
            m.stage("extract-xhat").outputs.at("train.zrfa"));
  const double across = m.report.mean_error(AbxCondition::kAcross);
  EXPECT_GE(across, 0.0);
  EXPECT_LE(across, 1.0);
  EXPECT_THROW(m.stage("no-such-stage"), Error);
  fs::remove_all(dir);
}

TEST(Pipeline, UnknownRepresentativeIsConfigError) {
  const auto dir = fresh_dir("rep");
  auto cfg = tiny_config(dir, Variant::kZ1Xhat);
  cfg.representative_speaker = "nobody";
  EXPECT_THROW(run_pipeline(cfg), ConfigError);
  fs::remove_all(dir);
}

TEST(Pipeline, SweepSingleCandidate) {
  const auto dir = fresh_dir("sweep");
  const auto cfg = tiny_config(dir, Variant::kZ1Xhat);
  const auto split = split_held_out(generate_synthetic_corpus(cfg.with_derived_seeds().synth),
                                    cfg.test_fraction);
  const auto speakers = split.train.manifest.speakers();
  ASSERT_GE(speakers.size(), 2u);
  const auto one = sweep_representative(cfg, {speakers[0]});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].speaker, speakers[0]);
  const auto two = sweep_representative(cfg, {speakers[0], speakers[1]});
  ASSERT_EQ(two.size(), 2u);
  EXPECT_LE(two[0].across, two[1].across);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  if (!std::getenv("ZRS_CLI")) GTEST_SKIP() << "ZRS_CLI not set";
  const auto dir = fresh_dir("cli");
  const auto cfg = (dir / "c.json").string();
  std::ofstream(cfg) << tiny_json().dump();

  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("run --config " + cfg + " --set bogus.field=1 --workdir " + dir.string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);

  const auto bad = (dir / "bad.zrfa").string();
  std::ofstream(bad) << "not an archive";
  EXPECT_EQ(run_cli("eval-abx --features " + bad + " --labels " + bad + " --manifest " + bad), 3);

  EXPECT_EQ(run_cli("run --config " + cfg + " --workdir " + (dir / "w").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "w" / "report-baseline.json"));
  fs::remove_all(dir);
}
