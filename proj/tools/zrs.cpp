// zrs: command-line front end for the subword-modeling pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "zrs/abx/abx.hpp"
#include "zrs/bnf/network.hpp"
#include "zrs/corpus/synth.hpp"
#include "zrs/fhvae/inference.hpp"
#include "zrs/fhvae/train.hpp"
#include "zrs/frontend/features.hpp"
#include "zrs/frontend/mfcc.hpp"
#include "zrs/frontend/wav.hpp"
#include "zrs/pipeline/pipeline.hpp"

namespace {

using namespace zrs;

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string workdir;
  int threads = 0;
  std::string log_level = "info";

  ExperimentConfig load() const {
    auto sets = overrides;
    if (!workdir.empty()) sets.push_back("workdir=\"" + workdir + "\"");
    if (threads > 0) sets.push_back("threads=" + std::to_string(threads));
    return load_experiment_config(config_path, sets).with_derived_seeds();
  }
};

SplitTag parse_split(const std::string& s) {
  try {
    return split_tag_from_string(s);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path);
}

int cmd_synth(const Common& c, const std::string& out_dir, double test_fraction) {
  const auto cfg = c.load();
  std::filesystem::create_directories(out_dir);
  auto corpus = generate_synthetic_corpus(cfg.synth);
  auto split = split_held_out(corpus, test_fraction > 0 ? test_fraction : cfg.test_fraction);
  const std::filesystem::path d(out_dir);
  save_manifest(split.train.manifest, (d / "train.jsonl").string());
  save_manifest(split.test.manifest, (d / "test.jsonl").string());
  save_archive(split.train.features, (d / "train.zrfa").string());
  save_archive(split.test.features, (d / "test.zrfa").string());
  save_labels(split.train.labels, (d / "train.zrla").string());
  save_labels(split.test.labels, (d / "test.zrla").string());
  spdlog::info("synth: {} train / {} test utterances in {}", split.train.manifest.size(),
               split.test.manifest.size(), out_dir);
  return 0;
}

int cmd_features(const Common& c, const std::string& wav_list, const std::string& in,
                 const std::string& manifest_path, const std::string& split, bool deltas,
                 bool cmn, const std::string& out) {
  const auto cfg = c.load();
  FeatureArchive archive;
  if (!wav_list.empty()) {
    std::ifstream list(wav_list);
    if (!list) throw ConfigError("cannot open wav list '" + wav_list + "'");
    std::string line;
    while (std::getline(list, line)) {
      std::istringstream fields(line);
      std::string id, path;
      if (!(fields >> id >> path)) continue;
      const auto wav = load_wav(path);
      if (wav.sample_rate != static_cast<int>(cfg.mfcc.sample_rate))
        throw Error("'" + path + "' has sample rate " + std::to_string(wav.sample_rate));
      archive.add(id, compute_mfcc(wav.samples, cfg.mfcc));
    }
  } else if (!in.empty()) {
    archive = load_archive(in);
  } else {
    throw ConfigError("features: one of --wav-list or --in is required");
  }
  if (cmn) {
    if (manifest_path.empty()) throw ConfigError("features: --cmn needs --manifest");
    archive = cmn_per_speaker(archive, load_manifest(manifest_path, parse_split(split)));
  }
  if (deltas) archive = add_deltas(archive);
  save_archive(archive, out);
  return 0;
}

int cmd_train_fhvae(const Common& c, const std::string& features,
                    const std::string& manifest_path, const std::string& out,
                    const std::string& history_path) {
  const auto cfg = c.load();
  const auto archive = load_archive(features);
  const auto manifest = load_manifest(manifest_path, SplitTag::kTrain);
  auto data = prepare_training_data(cfg.fhvae, archive, manifest);
  auto model = build_fhvae(cfg.fhvae, data);
  auto history = train_fhvae(model, data);
  nn::save_checkpoint(model.to_checkpoint(), out);
  if (!history_path.empty()) write_json_file(history_path, history);
  return 0;
}

int cmd_extract(const Common& c, const std::string& kind, const std::string& model_path,
                const std::string& features, const std::string& manifest_path,
                const std::string& split, const std::string& representative,
                const std::string& out) {
  (void)c.load();
  auto model = FhvaeModel::from_checkpoint(nn::load_checkpoint(model_path));
  const auto archive = load_archive(features);
  FeatureArchive result;
  if (kind == "z1") {
    result = extract_z1(model, archive);
  } else {
    if (manifest_path.empty()) throw ConfigError("extract " + kind + ": --manifest is required");
    const auto manifest = load_manifest(manifest_path, parse_split(split));
    if (kind == "xt") {
      result = reconstruct_plain(model, archive, manifest);
    } else {
      std::string rep = representative;
      if (rep.empty()) {
        rep = *std::min_element(model.sequences().ids.begin(), model.sequences().ids.end());
      } else if (model.sequences().find(rep) < 0) {
        throw ConfigError("representative '" + rep + "' has no s-vector in the model");
      }
      result = reconstruct_unified(model, archive, manifest, model.svector(rep));
    }
  }
  save_archive(result, out);
  return 0;
}

int cmd_cluster(const Common& c, const std::string& features, const std::string& manifest_path,
                const std::string& out_dir, bool deltas) {
  const auto cfg = c.load();
  auto archive = load_archive(features);
  if (deltas) archive = add_deltas(archive);
  const auto manifest = load_manifest(manifest_path, SplitTag::kTrain);
  std::vector<int> iterations;
  if (!cfg.dpgmm_preset.empty()) iterations = dpgmm_preset(cfg.dpgmm_preset);
  auto result = cluster_by_language(archive, manifest, cfg.dpgmm, iterations);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path d(out_dir);
  for (const auto& [lang, labels] : result.labels)
    save_labels(labels, (d / ("labels-" + lang + ".zrla")).string());
  write_json_file((d / "dpgmm.json").string(), result.sidecar);
  return 0;
}

int cmd_train_bnf(const Common& c, const std::string& features,
                  const std::string& manifest_path, const std::string& labels_dir,
                  bool deltas, const std::string& out, const std::string& history_path) {
  const auto cfg = c.load();
  auto archive = load_archive(features);
  if (deltas) archive = add_deltas(archive);
  const auto manifest = load_manifest(manifest_path, SplitTag::kTrain);
  std::map<std::string, LabelArchive> labels;
  for (const auto& lang : manifest.languages())
    labels.emplace(lang, load_labels((std::filesystem::path(labels_dir) /
                                      ("labels-" + lang + ".zrla")).string()));
  auto result = train_bnf(make_bnf_tasks(archive, manifest, labels), cfg.bnf);
  nn::save_checkpoint(result.network.to_checkpoint(), out);
  if (!history_path.empty()) write_json_file(history_path, result.history.epochs);
  return 0;
}

int cmd_extract_bnf(const Common& c, const std::string& model_path,
                    const std::string& features, bool deltas, const std::string& out) {
  (void)c.load();
  auto net = BnfNetwork::from_checkpoint(nn::load_checkpoint(model_path));
  auto archive = load_archive(features);
  if (deltas) archive = add_deltas(archive);
  save_archive(extract_bnf(net, archive), out);
  return 0;
}

int cmd_eval_abx(const Common& c, const std::string& features, const std::string& labels,
                 const std::string& manifest_path, const std::string& split,
                 const std::string& out, const std::string& csv) {
  const auto cfg = c.load();
  const auto manifest = load_manifest(manifest_path, parse_split(split));
  const auto segments = segments_from_labels(manifest, load_labels(labels));
  const auto report = evaluate_abx(segments, load_archive(features), cfg.abx.max_per_cell,
                                   cfg.abx.seed, cfg.abx.metric);
  const nlohmann::json j = report;
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(out, j);
  }
  if (!csv.empty()) {
    std::ofstream f(csv);
    write_cells_csv(report, f);
  }
  return 0;
}

int cmd_run(const Common& c) {
  const auto cfg = load_experiment_config(c.config_path, [&] {
    auto sets = c.overrides;
    if (!c.workdir.empty()) sets.push_back("workdir=\"" + c.workdir + "\"");
    if (c.threads > 0) sets.push_back("threads=" + std::to_string(c.threads));
    return sets;
  }());
  const auto manifest = run_pipeline(cfg);
  std::cout << nlohmann::json(manifest.report).dump(2) << '\n';
  return 0;
}

int cmd_sweep(const Common& c, std::vector<std::string> candidates, const std::string& out) {
  auto sets = c.overrides;
  if (!c.workdir.empty()) sets.push_back("workdir=\"" + c.workdir + "\"");
  const auto cfg = load_experiment_config(c.config_path, sets);
  if (candidates.empty()) {
    auto split = split_held_out(generate_synthetic_corpus(cfg.with_derived_seeds().synth),
                                cfg.test_fraction);
    candidates = split.train.manifest.speakers();
  }
  const auto rows = sweep_representative(cfg, candidates);
  std::ostringstream table;
  table << "rank,speaker,across,within\n";
  for (std::size_t k = 0; k < rows.size(); ++k)
    table << k + 1 << ',' << rows[k].speaker << ',' << rows[k].across << ','
          << rows[k].within << '\n';
  if (out.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream f(out);
    f << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-resource subword modeling toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  if (const char* env = std::getenv("ZRS_WORKDIR")) common.workdir = env;
  app.add_option("--config", common.config_path, "Experiment config (JSON)");
  app.add_option("--set", common.overrides, "Override a config field, e.g. fhvae.alpha=5")
      ->allow_extra_args(false);
  app.add_option("--workdir", common.workdir, "Working directory (default $ZRS_WORKDIR)");
  app.add_option("--threads", common.threads, "Worker cap for parallel stages");
  app.add_option("--log-level", common.log_level, "trace|debug|info|warn|error");

  std::function<int()> action;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  std::string synth_out;
  double synth_test = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--test-fraction", synth_test, "Held-out fraction");
  synth->callback([&] { action = [&] { return cmd_synth(common, synth_out, synth_test); }; });

  auto* feats = app.add_subcommand("features", "MFCCs from WAVs, or transform an archive");
  std::string wav_list, feats_in, feats_manifest, feats_split = "train", feats_out;
  bool feats_deltas = false, feats_cmn = false;
  feats->add_option("--wav-list", wav_list, "Lines of '<utterance-id> <wav path>'");
  feats->add_option("--in", feats_in, "Input archive");
  feats->add_option("--manifest", feats_manifest, "Manifest (for --cmn)");
  feats->add_option("--split", feats_split, "train|test");
  feats->add_flag("--deltas", feats_deltas, "Append deltas and delta-deltas");
  feats->add_flag("--cmn", feats_cmn, "Speaker-level mean normalization");
  feats->add_option("--out", feats_out, "Output archive")->required();
  feats->callback([&] {
    action = [&] {
      return cmd_features(common, wav_list, feats_in, feats_manifest, feats_split,
                          feats_deltas, feats_cmn, feats_out);
    };
  });

  auto* tf = app.add_subcommand("train-fhvae", "Train the FHVAE");
  std::string tf_features, tf_manifest, tf_out, tf_history;
  tf->add_option("--features", tf_features)->required();
  tf->add_option("--manifest", tf_manifest, "Training manifest")->required();
  tf->add_option("--out", tf_out, "Checkpoint path")->required();
  tf->add_option("--history", tf_history, "Training history JSON");
  tf->callback([&] {
    action = [&] { return cmd_train_fhvae(common, tf_features, tf_manifest, tf_out, tf_history); };
  });

  auto* ex = app.add_subcommand("extract", "Extract z1, xt or xhat with a trained FHVAE");
  std::string ex_kind, ex_model, ex_features, ex_manifest, ex_split = "train", ex_rep, ex_out;
  ex->add_option("kind", ex_kind, "z1|xt|xhat")
      ->required()
      ->check(CLI::IsMember({"z1", "xt", "xhat"}));
  ex->add_option("--model", ex_model)->required();
  ex->add_option("--features", ex_features)->required();
  ex->add_option("--manifest", ex_manifest);
  ex->add_option("--split", ex_split, "train|test");
  ex->add_option("--representative", ex_rep, "Unification target speaker (xhat)");
  ex->add_option("--out", ex_out)->required();
  ex->callback([&] {
    action = [&] {
      return cmd_extract(common, ex_kind, ex_model, ex_features, ex_manifest, ex_split, ex_rep,
                         ex_out);
    };
  });

  auto* cl = app.add_subcommand("cluster", "DPGMM frame labels per language");
  std::string cl_features, cl_manifest, cl_out;
  bool cl_deltas = false;
  cl->add_option("--features", cl_features)->required();
  cl->add_option("--manifest", cl_manifest)->required();
  cl->add_option("--out-dir", cl_out)->required();
  cl->add_flag("--deltas", cl_deltas, "Append deltas before clustering");
  cl->callback([&] {
    action = [&] { return cmd_cluster(common, cl_features, cl_manifest, cl_out, cl_deltas); };
  });

  auto* tb = app.add_subcommand("train-bnf", "Train the multilingual bottleneck network");
  std::string tb_features, tb_manifest, tb_labels, tb_out, tb_history;
  bool tb_deltas = false;
  tb->add_option("--features", tb_features)->required();
  tb->add_option("--manifest", tb_manifest)->required();
  tb->add_option("--labels-dir", tb_labels, "Output directory of 'cluster'")->required();
  tb->add_flag("--deltas", tb_deltas);
  tb->add_option("--out", tb_out)->required();
  tb->add_option("--history", tb_history);
  tb->callback([&] {
    action = [&] {
      return cmd_train_bnf(common, tb_features, tb_manifest, tb_labels, tb_deltas, tb_out,
                           tb_history);
    };
  });

  auto* eb = app.add_subcommand("extract-bnf", "Bottleneck features");
  std::string eb_model, eb_features, eb_out;
  bool eb_deltas = false;
  eb->add_option("--model", eb_model)->required();
  eb->add_option("--features", eb_features)->required();
  eb->add_flag("--deltas", eb_deltas);
  eb->add_option("--out", eb_out)->required();
  eb->callback([&] {
    action = [&] { return cmd_extract_bnf(common, eb_model, eb_features, eb_deltas, eb_out); };
  });

  auto* ea = app.add_subcommand("eval-abx", "ABX error rates of a representation");
  std::string ea_features, ea_labels, ea_manifest, ea_split = "test", ea_out, ea_csv;
  ea->add_option("--features", ea_features)->required();
  ea->add_option("--labels", ea_labels, "Phone labels defining the segments")->required();
  ea->add_option("--manifest", ea_manifest)->required();
  ea->add_option("--split", ea_split, "train|test");
  ea->add_option("--out", ea_out, "Report JSON (default stdout)");
  ea->add_option("--csv", ea_csv, "Per-cell CSV");
  ea->callback([&] {
    action = [&] {
      return cmd_eval_abx(common, ea_features, ea_labels, ea_manifest, ea_split, ea_out, ea_csv);
    };
  });

  auto* run = app.add_subcommand("run", "Full pipeline");
  run->callback([&] { action = [&] { return cmd_run(common); }; });

  auto* sweep = app.add_subcommand("sweep-representative",
                                   "Rank candidate representative speakers");
  std::vector<std::string> candidates;
  std::string sweep_out;
  sweep->add_option("--candidates", candidates, "Speaker ids (default: all)")->delimiter(',');
  sweep->add_option("--out", sweep_out, "CSV output (default stdout)");
  sweep->callback([&] { action = [&] { return cmd_sweep(common, candidates, sweep_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(common.log_level));
    return action();
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  }
}
