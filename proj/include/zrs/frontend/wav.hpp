#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zrs {

struct Waveform {
  double sample_rate = 0.0;
  std::vector<float> samples;  // scaled to the int16 range, not normalized
};

/// 16-bit PCM mono RIFF/WAVE only.
Waveform read_wav(std::istream& in);
Waveform load_wav(const std::string& path);
void write_wav(const Waveform& wav, std::ostream& out);

}  // namespace zrs
