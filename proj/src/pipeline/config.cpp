#include "zrs/pipeline/config.hpp"

#include <fstream>

namespace zrs {

namespace {

const std::vector<std::pair<Variant, std::string>>& variant_names() {
  static const std::vector<std::pair<Variant, std::string>> names = {
      {Variant::kBaseline, "baseline"}, {Variant::kZ1Orig, "z1-orig"},
      {Variant::kXtOrig, "xt-orig"},    {Variant::kZ1Xhat, "z1-xhat"},
      {Variant::kXtXhat, "xt-xhat"}};
  return names;
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [k, name] : variant_names())
    if (k == v) return name;
  throw Error("invalid variant");
}

Variant variant_from_string(const std::string& s) {
  for (const auto& [k, name] : variant_names())
    if (name == s) return k;
  throw ConfigError("unknown variant '" + s + "'");
}

std::string cluster_input(Variant v) {
  return v == Variant::kZ1Xhat || v == Variant::kXtXhat ? "xhat" : "raw";
}

std::string bnf_input(Variant v) {
  switch (v) {
    case Variant::kZ1Orig:
    case Variant::kZ1Xhat:
      return "z1";
    case Variant::kXtOrig:
    case Variant::kXtXhat:
      return "xt";
    default:
      return "raw";
  }
}

bool needs_fhvae(Variant v) { return v != Variant::kBaseline; }

std::vector<int> dpgmm_preset(const std::string& name) {
  if (name == "zs17-raw") return {120, 200, 3000};
  if (name == "zs17-recon") return {80, 80, 1400};
  throw ConfigError("unknown dpgmm preset '" + name + "'");
}

void to_json(nlohmann::json& j, const MfccConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"window", c.window},
       {"hop", c.hop},                 {"num_mel_filters", c.num_mel_filters},
       {"num_ceps", c.num_ceps},       {"preemphasis", c.preemphasis},
       {"low_freq", c.low_freq},       {"high_freq", c.high_freq}};
}

void from_json(const nlohmann::json& j, MfccConfig& c) {
  c = MfccConfig{};
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.window = j.value("window", c.window);
  c.hop = j.value("hop", c.hop);
  c.num_mel_filters = j.value("num_mel_filters", c.num_mel_filters);
  c.num_ceps = j.value("num_ceps", c.num_ceps);
  c.preemphasis = j.value("preemphasis", c.preemphasis);
  c.low_freq = j.value("low_freq", c.low_freq);
  c.high_freq = j.value("high_freq", c.high_freq);
}

void to_json(nlohmann::json& j, const AbxSettings& c) {
  j = {{"max_per_cell", c.max_per_cell}, {"metric", to_string(c.metric)}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, AbxSettings& c) {
  c = AbxSettings{};
  c.max_per_cell = j.value("max_per_cell", c.max_per_cell);
  if (j.contains("metric")) c.metric = frame_metric_from_string(j.at("metric").get<std::string>());
  c.seed = j.value("seed", c.seed);
}

void ExperimentConfig::validate() const {
  try {
    if (workdir.empty()) throw ConfigError("workdir must not be empty");
    if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test_fraction must be in (0, 1)");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!dpgmm_preset.empty()) (void)zrs::dpgmm_preset(dpgmm_preset);
    if (abx.max_per_cell < 1) throw ConfigError("abx.max_per_cell must be >= 1");
    synth.validate();
    mfcc.validate();
    fhvae.validate();
    dpgmm.validate();
    bnf.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig ExperimentConfig::with_derived_seeds() const {
  ExperimentConfig c = *this;
  c.synth.seed = mix_seed(seed, 1);
  c.fhvae.seed = mix_seed(seed, 2);
  c.dpgmm.seed = mix_seed(seed, 3);
  c.bnf.seed = mix_seed(seed, 4);
  c.abx.seed = mix_seed(seed, 5);
  c.dpgmm.threads = threads;
  return c;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"workdir", c.workdir},
       {"seed", c.seed},
       {"variant", to_string(c.variant)},
       {"representative_speaker", c.representative_speaker},
       {"synth", c.synth},
       {"test_fraction", c.test_fraction},
       {"cmn", c.cmn},
       {"mfcc", c.mfcc},
       {"fhvae", c.fhvae},
       {"dpgmm", c.dpgmm},
       {"dpgmm_preset", c.dpgmm_preset},
       {"bnf", c.bnf},
       {"abx", c.abx},
       {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.workdir = j.value("workdir", c.workdir);
  c.seed = j.value("seed", c.seed);
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.representative_speaker = j.value("representative_speaker", c.representative_speaker);
  if (j.contains("synth")) c.synth = j.at("synth").get<SynthConfig>();
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.cmn = j.value("cmn", c.cmn);
  if (j.contains("mfcc")) c.mfcc = j.at("mfcc").get<MfccConfig>();
  if (j.contains("fhvae")) c.fhvae = j.at("fhvae").get<FhvaeConfig>();
  if (j.contains("dpgmm")) c.dpgmm = j.at("dpgmm").get<DpgmmConfig>();
  c.dpgmm_preset = j.value("dpgmm_preset", c.dpgmm_preset);
  if (j.contains("bnf")) c.bnf = j.at("bnf").get<BnfConfig>();
  if (j.contains("abx")) c.abx = j.at("abx").get<AbxSettings>();
  c.threads = j.value("threads", c.threads);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const auto path = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("unknown config field '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  auto value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
  nlohmann::json doc = ExperimentConfig{};
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    auto file = nlohmann::json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object())
      throw ConfigError("config '" + path + "' is not a JSON object");
    // Normalize through the struct so missing fields take their defaults
    // and every field exists for the overrides below.
    try {
      doc = file.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  ExperimentConfig cfg;
  try {
    cfg = doc.get<ExperimentConfig>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace zrs
