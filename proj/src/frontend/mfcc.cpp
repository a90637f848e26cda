#include "zrs/frontend/mfcc.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <fftw3.h>

namespace zrs {

std::size_t MfccConfig::window_samples() const {
  return static_cast<std::size_t>(std::lround(window * sample_rate));
}

std::size_t MfccConfig::hop_samples() const {
  return static_cast<std::size_t>(std::lround(hop * sample_rate));
}

void MfccConfig::validate() const {
  if (!(sample_rate > 0)) throw Error("mfcc: sample_rate must be > 0");
  if (!(hop > 0 && window > hop)) throw Error("mfcc: need window > hop > 0");
  if (num_ceps < 1 || num_ceps > num_mel_filters)
    throw Error("mfcc: need 1 <= num_ceps <= num_mel_filters");
  if (hop_samples() < 1) throw Error("mfcc: hop shorter than one sample");
}

namespace {

double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

class FftPlan {
 public:
  explicit FftPlan(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  double* input() { return in_; }
  void power_spectrum(std::vector<double>& power) {
    fftw_execute(plan_);
    power.resize(static_cast<std::size_t>(n_ / 2 + 1));
    for (int k = 0; k <= n_ / 2; ++k)
      power[static_cast<std::size_t>(k)] =
          out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

/// num_filters x (fft_size/2 + 1) triangular weights on the mel scale.
Matrix mel_filterbank(const MfccConfig& cfg, int fft_size) {
  const int bins = fft_size / 2 + 1;
  const double nyquist = cfg.sample_rate / 2.0;
  const double high = cfg.high_freq > 0 ? cfg.high_freq : nyquist;
  const double mel_lo = hz_to_mel(cfg.low_freq);
  const double mel_hi = hz_to_mel(high);
  const double step = (mel_hi - mel_lo) / (cfg.num_mel_filters + 1);
  Matrix fb = Matrix::Zero(cfg.num_mel_filters, bins);
  for (int m = 0; m < cfg.num_mel_filters; ++m) {
    const double left = mel_lo + m * step;
    const double center = left + step;
    const double right = center + step;
    for (int k = 0; k < bins; ++k) {
      const double mel = hz_to_mel(k * cfg.sample_rate / fft_size);
      if (mel > left && mel < right)
        fb(m, k) = mel <= center ? (mel - left) / (center - left)
                                 : (right - mel) / (right - center);
    }
  }
  return fb;
}

Matrix dct_matrix(int num_ceps, int num_filters) {
  Matrix dct(num_ceps, num_filters);
  for (int c = 0; c < num_ceps; ++c) {
    const double scale = std::sqrt((c == 0 ? 1.0 : 2.0) / num_filters);
    for (int m = 0; m < num_filters; ++m)
      dct(c, m) = scale * std::cos(std::numbers::pi * c * (m + 0.5) / num_filters);
  }
  return dct;
}

}  // namespace

FrameMatrix compute_mfcc(std::span<const float> waveform, const MfccConfig& cfg) {
  cfg.validate();
  const std::size_t win = cfg.window_samples();
  const std::size_t hop = cfg.hop_samples();
  if (waveform.size() < win) throw Error("utterance too short");
  const std::size_t frames = (waveform.size() - win) / hop + 1;

  int fft_size = 1;
  while (static_cast<std::size_t>(fft_size) < win) fft_size <<= 1;

  const Matrix fb = mel_filterbank(cfg, fft_size);
  const Matrix dct = dct_matrix(cfg.num_ceps, cfg.num_mel_filters);
  std::vector<double> hamming(win);
  for (std::size_t i = 0; i < win; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (win - 1));

  FftPlan fft(fft_size);
  std::vector<double> power;
  Vector log_mel(cfg.num_mel_filters);
  FrameMatrix out(static_cast<Eigen::Index>(frames), cfg.num_ceps);
  constexpr double kFloor = 1e-10;
  for (std::size_t t = 0; t < frames; ++t) {
    const float* x = waveform.data() + t * hop;
    double* buf = fft.input();
    for (std::size_t i = 0; i < win; ++i) {
      const double prev = i == 0 ? x[0] : x[i - 1];
      buf[i] = (x[i] - cfg.preemphasis * prev) * hamming[i];
    }
    for (int i = static_cast<int>(win); i < fft_size; ++i) buf[i] = 0.0;
    fft.power_spectrum(power);
    const Eigen::Map<const Vector> spec(power.data(),
                                        static_cast<Eigen::Index>(power.size()));
    log_mel = (fb * spec).array().max(kFloor).log();
    out.row(static_cast<Eigen::Index>(t)) = (dct * log_mel).cast<float>().transpose();
  }
  return out;
}

}  // namespace zrs
