#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/common.hpp"

namespace zrs {

/// A stage failed; carries the stage name (CLI exit code 3).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Named input artifact and its content hash.
using Provenance = std::map<std::string, std::string>;

struct StageRecord {
  std::string name;
  std::string key;
  bool cache_hit = false;
  nlohmann::json config;
  Provenance inputs;
  Provenance outputs;  // file name -> content hash
  double seconds = 0;
  std::filesystem::path dir;

  /// Absolute path of an output file.
  std::string path(const std::string& file) const { return (dir / file).string(); }
};

void to_json(nlohmann::json& j, const StageRecord& r);

/// Content-addressed stage cache under <workdir>/stages/<name>-<key>/. The
/// key hashes the stage name, its config and its input hashes; a cached
/// result is reused only when every recorded output still hashes the same.
class StageRunner {
 public:
  using Produce = std::function<void(const std::filesystem::path& dir)>;

  explicit StageRunner(std::filesystem::path workdir);

  /// Runs `produce` (which writes its files into the stage directory) unless
  /// a valid cached result exists. Exceptions become StageError.
  StageRecord run(const std::string& name, const nlohmann::json& config,
                         const Provenance& inputs, const Produce& produce);

  const std::vector<StageRecord>& records() const { return records_; }
  const std::filesystem::path& workdir() const { return workdir_; }

 private:
  std::filesystem::path workdir_;
  std::vector<StageRecord> records_;
};

}  // namespace zrs
