#include "zrs/frontend/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "zrs/common.hpp"

namespace zrs {

namespace {

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("wav: unexpected end of file");
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(std::istream& in) {
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw Error("wav: missing RIFF");
  get<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw Error("wav: missing WAVE");

  Waveform wav;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const auto size = get<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const auto format = get<std::uint16_t>(in);
      const auto channels = get<std::uint16_t>(in);
      const auto rate = get<std::uint32_t>(in);
      get<std::uint32_t>(in);
      get<std::uint16_t>(in);
      const auto bits = get<std::uint16_t>(in);
      if (format != 1 || channels != 1 || bits != 16)
        throw Error("wav: only 16-bit PCM mono is supported");
      wav.sample_rate = rate;
      in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw Error("wav: data chunk before fmt chunk");
      std::vector<std::int16_t> pcm(size / 2);
      in.read(reinterpret_cast<char*>(pcm.data()),
              static_cast<std::streamsize>(pcm.size() * 2));
      if (!in) throw Error("wav: truncated data chunk");
      wav.samples.assign(pcm.begin(), pcm.end());
      return wav;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  throw Error("wav: no data chunk");
}

Waveform load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_wav(in);
}

void write_wav(const Waveform& wav, std::ostream& out) {
  const auto n = static_cast<std::uint32_t>(wav.samples.size());
  const auto rate = static_cast<std::uint32_t>(wav.sample_rate);
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, 1);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, rate);
  put<std::uint32_t>(out, rate * 2);
  put<std::uint16_t>(out, 2);
  put<std::uint16_t>(out, 16);
  out.write("data", 4);
  put<std::uint32_t>(out, 2 * n);
  for (float s : wav.samples)
    put<std::int16_t>(out, static_cast<std::int16_t>(
                               std::clamp(std::lround(s), -32768L, 32767L)));
}

}  // namespace zrs
