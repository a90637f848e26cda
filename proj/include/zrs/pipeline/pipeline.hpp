#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/abx/abx.hpp"
#include "zrs/bnf/network.hpp"
#include "zrs/corpus/synth.hpp"
#include "zrs/dpgmm/sampler.hpp"
#include "zrs/fhvae/model.hpp"
#include "zrs/pipeline/config.hpp"
#include "zrs/pipeline/stages.hpp"

namespace zrs {

// Building blocks shared by the pipeline and the CLI subcommands.

/// Frames of each language's utterances (optionally with deltas appended)
/// clustered by their own DPGMM; labels are per-language cluster ids.
struct ClusterResult {
  std::map<std::string, LabelArchive> labels;  // by language
  nlohmann::json sidecar;                      // by language
};
ClusterResult cluster_by_language(const FeatureArchive& features, const Manifest& manifest,
                                  const DpgmmConfig& cfg,
                                  const std::vector<int>& iterations_per_language = {});

std::vector<BnfTask> make_bnf_tasks(const FeatureArchive& features, const Manifest& manifest,
                                    const std::map<std::string, LabelArchive>& labels);

/// Lexicographically first training speaker.
std::string default_representative(const Manifest& train);

/// Keeps only the utterances listed in `manifest`.
FeatureArchive select(const FeatureArchive& archive, const Manifest& manifest);

struct RunManifest {
  ExperimentConfig config;
  std::vector<StageRecord> stages;
  AbxReport report;
  std::string report_path;

  const StageRecord& stage(const std::string& name) const;
  bool all_cache_hits() const;
};

void to_json(nlohmann::json& j, const RunManifest& m);

/// corpus -> features -> [fhvae -> extraction] -> dpgmm -> bnf ->
/// bnf extraction -> abx, with every stage cached in the workdir. Writes
/// <workdir>/report-<variant>.json and run-<variant>.json.
RunManifest run_pipeline(const ExperimentConfig& cfg);

struct SweepRow {
  std::string speaker;
  double across = 0;
  double within = 0;
};

/// Scores x-hat of the held-out utterances unified toward each candidate's
/// s-vector; rows sorted by across-speaker error (then within, then id).
std::vector<SweepRow> sweep_representative(const ExperimentConfig& cfg,
                                           const std::vector<std::string>& candidates);

}  // namespace zrs
