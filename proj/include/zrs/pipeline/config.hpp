#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/abx/dtw.hpp"
#include "zrs/bnf/network.hpp"
#include "zrs/corpus/synth.hpp"
#include "zrs/dpgmm/sampler.hpp"
#include "zrs/fhvae/config.hpp"
#include "zrs/frontend/mfcc.hpp"

namespace zrs {

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Which representation feeds DPGMM clustering and which feeds BNF training.
///   variant    clustering  BNF
///   baseline   raw         raw
///   z1-orig    raw         z1
///   xt-orig    raw         xt
///   z1-xhat    xhat        z1
///   xt-xhat    xhat        xt
enum class Variant { kBaseline, kZ1Orig, kXtOrig, kZ1Xhat, kXtXhat };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
/// "raw" or "xhat".
std::string cluster_input(Variant v);
/// "raw", "z1" or "xt".
std::string bnf_input(Variant v);
bool needs_fhvae(Variant v);

/// Per-language DPGMM iteration counts of a named preset ("zs17-raw",
/// "zs17-recon"); throws ConfigError for unknown names.
std::vector<int> dpgmm_preset(const std::string& name);

void to_json(nlohmann::json& j, const MfccConfig& c);
void from_json(const nlohmann::json& j, MfccConfig& c);

struct AbxSettings {
  std::size_t max_per_cell = 10;
  FrameMetric metric = FrameMetric::kCosine;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const AbxSettings& c);
void from_json(const nlohmann::json& j, AbxSettings& c);

struct ExperimentConfig {
  std::string workdir = "work";
  std::uint64_t seed = 0;
  Variant variant = Variant::kBaseline;
  /// Training speaker whose s-vector is the unification target; empty picks
  /// the lexicographically first training speaker.
  std::string representative_speaker;

  SynthConfig synth{};
  double test_fraction = 0.25;
  /// Speaker-level mean normalization of the input features.
  bool cmn = false;

  MfccConfig mfcc{};
  FhvaeConfig fhvae{};
  DpgmmConfig dpgmm{};
  /// Optional named preset overriding dpgmm.iterations per language.
  std::string dpgmm_preset;
  BnfConfig bnf{};
  AbxSettings abx{};
  /// Worker cap for parallel stages.
  int threads = 1;

  void validate() const;
  /// Copy with every stage seed derived from `seed`.
  ExperimentConfig with_derived_seeds() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise. The path must name an
/// existing field.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Defaults, then the file (if any), then overrides; throws ConfigError.
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides);

}  // namespace zrs
