#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace zrs {

/// Per-frame features of one utterance; row = frame. Stored as 32-bit
/// floats to match the on-disk archive format.
using FrameMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by optimizers and training loops when a value stops being finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// 64-bit FNV-1a, used for content hashes of artifacts and configs.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_bytes(std::string_view bytes);
std::string hash_file(const std::string& path);

/// Seed derivation for independent, reproducible random streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

FrameMatrix to_frames(const Matrix& m);
Matrix to_matrix(const FrameMatrix& f);

}  // namespace zrs
