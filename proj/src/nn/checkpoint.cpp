#include "zrs/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace zrs::nn {

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint: truncated");
  return v;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

const Mat& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw Error("checkpoint: no tensor '" + name + "'");
}

void Checkpoint::add(const ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i)
    tensors.emplace_back(params[i].name(), params[i].value);
}

ParameterSet Checkpoint::to_parameters() const {
  ParameterSet ps;
  for (const auto& [n, m] : tensors) ps.add(n, m);
  return ps;
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  const std::string header = ckpt.header.dump();
  out.write("ZRCK", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ckpt.tensors) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    put<std::uint64_t>(out, offset);
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  for (const auto& [name, m] : ckpt.tensors) {
    const RowMajor rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(rm.size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "ZRCK", 4) != 0)
    throw Error("checkpoint: bad magic");
  if (get<std::uint32_t>(in) != 1) throw Error("checkpoint: unsupported version");
  std::string header(get<std::uint32_t>(in), '\0');
  in.read(header.data(), static_cast<std::streamsize>(header.size()));
  if (!in) throw Error("checkpoint: truncated header");
  Checkpoint ckpt;
  ckpt.header = nlohmann::json::parse(header);
  const auto count = get<std::uint32_t>(in);
  struct Rec {
    std::string name;
    std::uint32_t rows, cols;
    std::uint64_t offset;
  };
  std::vector<Rec> index(count);
  for (auto& r : index) {
    r.name.resize(get<std::uint16_t>(in));
    in.read(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    r.rows = get<std::uint32_t>(in);
    r.cols = get<std::uint32_t>(in);
    r.offset = get<std::uint64_t>(in);
  }
  std::uint64_t offset = 0;
  for (const auto& r : index) {
    if (r.offset != offset) throw Error("checkpoint: index/payload mismatch");
    RowMajor rm(r.rows, r.cols);
    in.read(reinterpret_cast<char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!in) throw Error("checkpoint: truncated payload");
    offset += static_cast<std::uint64_t>(rm.size()) * sizeof(double);
    ckpt.tensors.emplace_back(r.name, Mat(rm));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace zrs::nn
