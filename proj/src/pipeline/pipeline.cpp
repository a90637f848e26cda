#include "zrs/pipeline/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "zrs/fhvae/inference.hpp"
#include "zrs/fhvae/train.hpp"
#include "zrs/frontend/features.hpp"

namespace zrs {

namespace fs = std::filesystem;

ClusterResult cluster_by_language(const FeatureArchive& features, const Manifest& manifest,
                                  const DpgmmConfig& cfg,
                                  const std::vector<int>& iterations_per_language) {
  ClusterResult out;
  const auto languages = manifest.languages();
  for (std::size_t li = 0; li < languages.size(); ++li) {
    const auto& lang = languages[li];
    std::vector<const FeatureArchive::Entry*> utts;
    Eigen::Index frames = 0;
    for (const auto& e : features.entries()) {
      const auto* rec = manifest.find(e.first);
      if (rec && rec->language_id == lang) {
        utts.push_back(&e);
        frames += e.second.rows();
      }
    }
    if (utts.empty()) continue;
    Matrix x(frames, static_cast<Eigen::Index>(features.dim()));
    Eigen::Index r = 0;
    for (const auto* e : utts) {
      x.middleRows(r, e->second.rows()) = e->second.cast<double>();
      r += e->second.rows();
    }
    DpgmmConfig c = cfg;
    c.seed = mix_seed(cfg.seed, li);
    if (!iterations_per_language.empty())
      c.iterations = iterations_per_language[std::min(li, iterations_per_language.size() - 1)];
    auto state = fit(x, c);
    LabelArchive labels(state.num_clusters());
    r = 0;
    for (const auto* e : utts) {
      const auto n = static_cast<std::size_t>(e->second.rows());
      const auto begin = state.assignments.begin() + r;
      labels.add(e->first, std::vector<std::int32_t>(begin, begin + static_cast<Eigen::Index>(n)));
      r += e->second.rows();
    }
    out.labels.emplace(lang, std::move(labels));
    out.sidecar[lang] = sidecar(state);
  }
  return out;
}

std::vector<BnfTask> make_bnf_tasks(const FeatureArchive& features, const Manifest& manifest,
                                    const std::map<std::string, LabelArchive>& labels) {
  std::vector<BnfTask> tasks;
  for (const auto& lang : manifest.languages()) {
    auto it = labels.find(lang);
    if (it == labels.end()) throw Error("no labels for language '" + lang + "'");
    BnfTask t;
    t.language = lang;
    t.labels = it->second;
    for (const auto& [id, f] : features.entries()) {
      const auto* rec = manifest.find(id);
      if (rec && rec->language_id == lang) t.features.add(id, f);
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::string default_representative(const Manifest& train) {
  auto speakers = train.speakers();
  if (speakers.empty()) throw Error("no training speakers");
  return *std::min_element(speakers.begin(), speakers.end());
}

FeatureArchive select(const FeatureArchive& archive, const Manifest& manifest) {
  FeatureArchive out;
  for (const auto& [id, f] : archive.entries())
    if (manifest.find(id)) out.add(id, f);
  return out;
}

const StageRecord& RunManifest::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return s;
  throw Error("run manifest has no stage '" + name + "'");
}

bool RunManifest::all_cache_hits() const {
  return std::all_of(stages.begin(), stages.end(), [](const auto& s) { return s.cache_hit; });
}

void to_json(nlohmann::json& j, const RunManifest& m) {
  j = {{"config", m.config}, {"stages", m.stages}, {"report", m.report},
       {"report_path", m.report_path}};
}

namespace {

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + p.string());
}

nlohmann::json read_json(const std::string& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p);
  return nlohmann::json::parse(in);
}

std::string short_name(const std::string& stage, const std::string& file) {
  return stage + "/" + file;
}

/// Stages up to and including the FHVAE, shared by run_pipeline and the
/// representative sweep.
struct Front {
  Manifest train_manifest;
  Manifest test_manifest;
  StageRecord corpus;
  StageRecord features;
};

Front run_front(StageRunner& runner, const ExperimentConfig& cfg) {
  Front f;
  f.corpus = runner.run("corpus",
                        {{"synth", cfg.synth}, {"test_fraction", cfg.test_fraction}}, {},
                        [&](const fs::path& dir) {
                          auto corpus = generate_synthetic_corpus(cfg.synth);
                          auto split = split_held_out(corpus, cfg.test_fraction);
                          save_manifest(split.train.manifest, (dir / "train.jsonl").string());
                          save_manifest(split.test.manifest, (dir / "test.jsonl").string());
                          save_archive(split.train.features, (dir / "train.zrfa").string());
                          save_archive(split.test.features, (dir / "test.zrfa").string());
                          save_labels(split.train.labels, (dir / "train.zrla").string());
                          save_labels(split.test.labels, (dir / "test.zrla").string());
                        });
  f.train_manifest = load_manifest(f.corpus.path("train.jsonl"), SplitTag::kTrain);
  f.test_manifest = load_manifest(f.corpus.path("test.jsonl"), SplitTag::kTest);

  f.features = runner.run(
      "features", {{"cmn", cfg.cmn}},
      {{"corpus/train.zrfa", f.corpus.outputs.at("train.zrfa")},
       {"corpus/test.zrfa", f.corpus.outputs.at("test.zrfa")}},
      [&](const fs::path& dir) {
        auto train = load_archive(f.corpus.path("train.zrfa"));
        auto test = load_archive(f.corpus.path("test.zrfa"));
        if (cfg.cmn) {
          train = cmn_per_speaker(train, f.train_manifest);
          test = cmn_per_speaker(test, f.test_manifest);
        }
        save_archive(train, (dir / "train.zrfa").string());
        save_archive(test, (dir / "test.zrfa").string());
      });
  return f;
}

StageRecord run_fhvae(StageRunner& runner, const ExperimentConfig& cfg, const Front& f) {
  return runner.run("fhvae", {{"fhvae", cfg.fhvae}},
                    {{"features/train.zrfa", f.features.outputs.at("train.zrfa")},
                     {"corpus/train.jsonl", f.corpus.outputs.at("train.jsonl")}},
                    [&](const fs::path& dir) {
                      auto train = load_archive(f.features.path("train.zrfa"));
                      auto data = prepare_training_data(cfg.fhvae, train, f.train_manifest);
                      auto model = build_fhvae(cfg.fhvae, data);
                      auto history = train_fhvae(model, data);
                      nn::save_checkpoint(model.to_checkpoint(), (dir / "model.zrck").string());
                      write_json(dir / "history.json", history);
                    });
}

/// z1, xt or xhat for the training and held-out archives.
StageRecord run_extract(StageRunner& runner, const std::string& kind,
                        const std::string& representative, const Front& f,
                        const StageRecord& fhvae) {
  nlohmann::json config = {{"kind", kind}};
  if (kind == "xhat") config["representative"] = representative;
  return runner.run(
      "extract-" + kind, config,
      {{"fhvae/model.zrck", fhvae.outputs.at("model.zrck")},
       {"features/train.zrfa", f.features.outputs.at("train.zrfa")},
       {"features/test.zrfa", f.features.outputs.at("test.zrfa")}},
      [&](const fs::path& dir) {
        auto model = FhvaeModel::from_checkpoint(nn::load_checkpoint(fhvae.path("model.zrck")));
        auto train = load_archive(f.features.path("train.zrfa"));
        auto test = load_archive(f.features.path("test.zrfa"));
        FeatureArchive out_train, out_test;
        if (kind == "z1") {
          out_train = extract_z1(model, train);
          out_test = extract_z1(model, test);
        } else if (kind == "xt") {
          out_train = reconstruct_plain(model, train, f.train_manifest);
          out_test = reconstruct_plain(model, test, f.test_manifest);
        } else if (kind == "xhat") {
          const Vector target = model.svector(representative);
          out_train = reconstruct_unified(model, train, f.train_manifest, target);
          out_test = reconstruct_unified(model, test, f.test_manifest, target);
        } else {
          throw Error("unknown extraction '" + kind + "'");
        }
        save_archive(out_train, (dir / "train.zrfa").string());
        save_archive(out_test, (dir / "test.zrfa").string());
      });
}

std::string resolve_representative(const ExperimentConfig& cfg, const Manifest& train) {
  if (cfg.representative_speaker.empty()) return default_representative(train);
  const auto speakers = train.speakers();
  if (std::find(speakers.begin(), speakers.end(), cfg.representative_speaker) == speakers.end())
    throw ConfigError("representative speaker '" + cfg.representative_speaker +
                      "' is not a training speaker");
  return cfg.representative_speaker;
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& user_cfg) {
  user_cfg.validate();
  const ExperimentConfig cfg = user_cfg.with_derived_seeds();
  const fs::path workdir(cfg.workdir);
  fs::create_directories(workdir);
  StageRunner runner(workdir);
  RunManifest manifest;
  manifest.config = user_cfg;

  Front f = run_front(runner, cfg);
  const auto cl_in = cluster_input(cfg.variant);
  const auto bnf_in = bnf_input(cfg.variant);

  // Stage that provides each named representation (train + test archives).
  std::map<std::string, StageRecord> source;
  source["raw"] = f.features;
  if (needs_fhvae(cfg.variant)) {
    const auto rep = resolve_representative(cfg, f.train_manifest);
    const auto fh = run_fhvae(runner, cfg, f);
    for (const auto& kind : std::set<std::string>{cl_in, bnf_in})
      if (kind != "raw") source[kind] = run_extract(runner, kind, rep, f, fh);
  }
  const auto& cl_src = source.at(cl_in);
  const auto& bnf_src = source.at(bnf_in);

  std::vector<int> iterations;
  if (!cfg.dpgmm_preset.empty()) iterations = dpgmm_preset(cfg.dpgmm_preset);
  const auto cluster = runner.run(
      "cluster", {{"dpgmm", cfg.dpgmm}, {"iterations", iterations}, {"deltas", true}},
      {{short_name(cl_src.name, "train.zrfa"), cl_src.outputs.at("train.zrfa")},
       {"corpus/train.jsonl", f.corpus.outputs.at("train.jsonl")}},
      [&](const fs::path& dir) {
        auto features = add_deltas(load_archive(cl_src.path("train.zrfa")));
        auto result = cluster_by_language(features, f.train_manifest, cfg.dpgmm, iterations);
        for (const auto& [lang, labels] : result.labels)
          save_labels(labels, (dir / ("labels-" + lang + ".zrla")).string());
        write_json(dir / "dpgmm.json", result.sidecar);
      });

  Provenance bnf_inputs = {{short_name(bnf_src.name, "train.zrfa"), bnf_src.outputs.at("train.zrfa")},
                           {"corpus/train.jsonl", f.corpus.outputs.at("train.jsonl")}};
  for (const auto& [file, hash] : cluster.outputs)
    if (file.rfind("labels-", 0) == 0) bnf_inputs["cluster/" + file] = hash;
  const auto bnf = runner.run(
      "bnf", {{"bnf", cfg.bnf}, {"deltas", true}}, bnf_inputs, [&](const fs::path& dir) {
        auto features = add_deltas(load_archive(bnf_src.path("train.zrfa")));
        std::map<std::string, LabelArchive> labels;
        for (const auto& lang : f.train_manifest.languages())
          labels.emplace(lang, load_labels(cluster.path("labels-" + lang + ".zrla")));
        auto result = train_bnf(make_bnf_tasks(features, f.train_manifest, labels), cfg.bnf);
        nn::save_checkpoint(result.network.to_checkpoint(), (dir / "model.zrck").string());
        write_json(dir / "history.json", result.history.epochs);
      });

  const auto bnf_out = runner.run(
      "extract-bnf", {{"deltas", true}},
      {{"bnf/model.zrck", bnf.outputs.at("model.zrck")},
       {short_name(bnf_src.name, "test.zrfa"), bnf_src.outputs.at("test.zrfa")}},
      [&](const fs::path& dir) {
        auto net = BnfNetwork::from_checkpoint(nn::load_checkpoint(bnf.path("model.zrck")));
        auto test = add_deltas(load_archive(bnf_src.path("test.zrfa")));
        save_archive(extract_bnf(net, test), (dir / "test.zrfa").string());
      });

  const auto abx = runner.run(
      "abx", {{"abx", cfg.abx}},
      {{"extract-bnf/test.zrfa", bnf_out.outputs.at("test.zrfa")},
       {"corpus/test.zrla", f.corpus.outputs.at("test.zrla")},
       {"corpus/test.jsonl", f.corpus.outputs.at("test.jsonl")}},
      [&](const fs::path& dir) {
        auto reps = load_archive(bnf_out.path("test.zrfa"));
        auto truth = load_labels(f.corpus.path("test.zrla"));
        auto segments = segments_from_labels(f.test_manifest, truth);
        auto report = evaluate_abx(segments, reps, cfg.abx.max_per_cell, cfg.abx.seed,
                                   cfg.abx.metric);
        write_json(dir / "report.json", report);
        std::ofstream csv(dir / "cells.csv");
        write_cells_csv(report, csv);
      });

  manifest.stages = runner.records();
  auto report_json = read_json(abx.path("report.json"));
  for (const auto& s : report_json) {
    AbxSummary sum;
    sum.language = s.at("language").get<std::string>();
    sum.condition = abx_condition_from_string(s.at("condition").get<std::string>());
    sum.error_rate = s.at("error_rate").get<double>();
    sum.cells = s.at("cells").get<std::size_t>();
    sum.triplets = s.at("triplets").get<std::size_t>();
    manifest.report.summaries.push_back(sum);
  }
  const auto variant = to_string(cfg.variant);
  manifest.report_path = (workdir / ("report-" + variant + ".json")).string();
  fs::copy_file(abx.path("report.json"), manifest.report_path,
                fs::copy_options::overwrite_existing);
  write_json(workdir / ("run-" + variant + ".json"), manifest);
  spdlog::info("{}: across {:.4f} within {:.4f}", variant,
               manifest.report.mean_error(AbxCondition::kAcross),
               manifest.report.mean_error(AbxCondition::kWithin));
  return manifest;
}

std::vector<SweepRow> sweep_representative(const ExperimentConfig& user_cfg,
                                           const std::vector<std::string>& candidates) {
  user_cfg.validate();
  if (candidates.empty()) throw ConfigError("no candidate speakers");
  const ExperimentConfig cfg = user_cfg.with_derived_seeds();
  StageRunner runner(cfg.workdir);
  Front f = run_front(runner, cfg);
  const auto speakers = f.train_manifest.speakers();
  for (const auto& c : candidates)
    if (std::find(speakers.begin(), speakers.end(), c) == speakers.end())
      throw ConfigError("unknown candidate speaker '" + c + "'");
  const auto fh = run_fhvae(runner, cfg, f);
  auto model = FhvaeModel::from_checkpoint(nn::load_checkpoint(fh.path("model.zrck")));
  const auto test = load_archive(f.features.path("test.zrfa"));
  const auto truth = load_labels(f.corpus.path("test.zrla"));
  const auto segments = segments_from_labels(f.test_manifest, truth);

  std::vector<SweepRow> rows;
  for (const auto& c : candidates) {
    const auto xhat = reconstruct_unified(model, test, f.test_manifest, model.svector(c));
    const auto report = evaluate_abx(segments, xhat, cfg.abx.max_per_cell, cfg.abx.seed,
                                     cfg.abx.metric);
    rows.push_back({c, report.mean_error(AbxCondition::kAcross),
                    report.mean_error(AbxCondition::kWithin)});
    spdlog::info("representative {}: across {:.4f} within {:.4f}", c, rows.back().across,
                 rows.back().within);
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.across, a.within, a.speaker) < std::tie(b.across, b.within, b.speaker);
  });
  return rows;
}

}  // namespace zrs
