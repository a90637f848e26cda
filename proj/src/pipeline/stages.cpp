#include "zrs/pipeline/stages.hpp"

#include <chrono>
#include <fstream>

#include <spdlog/spdlog.h>

namespace zrs {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRecordFile = "stage.json";

bool cached_outputs_valid(const fs::path& dir, Provenance& outputs) {
  std::ifstream in(dir / kRecordFile);
  if (!in) return false;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("outputs")) return false;
  outputs = j.at("outputs").get<Provenance>();
  for (const auto& [file, hash] : outputs) {
    const auto p = dir / file;
    if (!fs::exists(p) || hash_file(p.string()) != hash) {
      spdlog::warn("stage cache {}: '{}' changed; re-running", dir.filename().string(), file);
      return false;
    }
  }
  return !outputs.empty();
}

}  // namespace

void to_json(nlohmann::json& j, const StageRecord& r) {
  j = {{"name", r.name},         {"key", r.key},         {"cache_hit", r.cache_hit},
       {"config", r.config},     {"inputs", r.inputs},   {"outputs", r.outputs},
       {"seconds", r.seconds},   {"dir", r.dir.string()}};
}

StageRunner::StageRunner(fs::path workdir) : workdir_(std::move(workdir)) {}

StageRecord StageRunner::run(const std::string& name, const nlohmann::json& config,
                                    const Provenance& inputs, const Produce& produce) {
  StageRecord rec;
  rec.name = name;
  rec.config = config;
  rec.inputs = inputs;
  Fnv1a h;
  h.update(name);
  h.update(config.dump());
  for (const auto& [k, v] : inputs) {
    h.update(k);
    h.update(v);
  }
  rec.key = h.hex();
  rec.dir = workdir_ / "stages" / (name + "-" + rec.key);

  const auto t0 = std::chrono::steady_clock::now();
  if (cached_outputs_valid(rec.dir, rec.outputs)) {
    rec.cache_hit = true;
    spdlog::info("stage {}: cache hit ({})", name, rec.key);
  } else {
    spdlog::info("stage {}: running ({})", name, rec.key);
    try {
      fs::remove_all(rec.dir);
      fs::create_directories(rec.dir);
      produce(rec.dir);
      rec.outputs.clear();
      for (const auto& entry : fs::directory_iterator(rec.dir)) {
        if (!entry.is_regular_file() || entry.path().filename() == kRecordFile) continue;
        rec.outputs[entry.path().filename().string()] = hash_file(entry.path().string());
      }
      if (rec.outputs.empty()) throw Error("stage produced no output");
      nlohmann::json j = {{"name", name}, {"key", rec.key}, {"config", config},
                          {"inputs", inputs}, {"outputs", rec.outputs}};
      std::ofstream out(rec.dir / kRecordFile);
      out << j.dump(2) << '\n';
      if (!out) throw Error("cannot write stage record");
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  records_.push_back(std::move(rec));
  return records_.back();
}

}  // namespace zrs
