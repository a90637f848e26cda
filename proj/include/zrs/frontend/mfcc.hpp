#pragma once

#include <span>

#include "zrs/common.hpp"

namespace zrs {

struct MfccConfig {
  double sample_rate = 16000.0;
  double window = 0.025;  // seconds
  double hop = 0.010;     // seconds
  int num_mel_filters = 23;
  int num_ceps = 13;  // C0 included as the first coefficient
  double preemphasis = 0.97;
  double low_freq = 20.0;
  double high_freq = 0.0;  // <= 0 means Nyquist

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  void validate() const;
};

/// Framing -> per-frame pre-emphasis -> Hamming window -> power spectrum
/// (FFT size = next power of two) -> HTK-style triangular mel filterbank ->
/// log -> orthonormal DCT-II, first num_ceps coefficients.
/// T = floor((len - window) / hop) + 1.
FrameMatrix compute_mfcc(std::span<const float> waveform, const MfccConfig& cfg);

}  // namespace zrs
