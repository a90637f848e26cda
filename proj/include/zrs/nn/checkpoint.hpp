#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/nn/graph.hpp"

namespace zrs::nn {

/// Named tensors plus a JSON header of hyperparameters.
///
/// Layout: "ZRCK", u32 version (1), u32 header length, header JSON bytes,
/// u32 tensor count, index records (u16 name length, name, u32 rows, u32 cols,
/// u64 payload offset), then row-major little-endian f64 payloads.
struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, Mat>> tensors;

  const Mat& tensor(const std::string& name) const;
  void add(const ParameterSet& params);
  /// Rebuilds a parameter set holding every tensor, in file order.
  ParameterSet to_parameters() const;
};

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace zrs::nn
