#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "zrs/nn/adam.hpp"

namespace zrs {

enum class EncoderKind {
  kLstm,   // recurrent encoders/decoder (reference architecture)
  kDense,  // feed-forward over the flattened segment (fast mode)
};

std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

struct FhvaeConfig {
  int z1_dim = 32;
  int z2_dim = 32;
  EncoderKind kind = EncoderKind::kLstm;
  int num_layers = 2;
  int hidden_dim = 256;
  int segment_length = 10;

  double sigma2_mu2 = 1.0;
  double sigma2_z1 = 1.0;
  double sigma2_z2 = 0.25;
  double alpha = 10.0;

  int batch_size = 256;
  int max_epochs = 100;
  int patience = 20;
  double cv_fraction = 0.1;
  /// Frame shift between training segments.
  int train_shift = 1;
  /// Cap on training segments visited per epoch (0 = all).
  int segments_per_epoch = 0;
  double clip_norm = 5.0;
  nn::AdamConfig adam{};
  /// Average decoded frames over all overlapping segments instead of taking
  /// each segment's center frame.
  bool overlap_average = false;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const FhvaeConfig& c);
void from_json(const nlohmann::json& j, FhvaeConfig& c);

}  // namespace zrs
