// Copyright 2026 The emoadapt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// MFCC feature extraction: 16-bit mono PCM WAV reading, radix-2 FFT,
// Slaney-normalized triangular mel filterbank, orthonormal type-II DCT.
//
// The pipeline per frame is: periodic Hann window -> |rFFT|^2 ->
// mel filterbank -> natural log floored at log_floor -> DCT-II (ortho),
// keeping the first n_mfcc coefficients.  Without center padding the
// frame count is T = floor((N - n_fft)/hop) + 1; with it, the signal is
// reflect-padded by n_fft/2 on both ends and T = floor(N/hop) + 1.
// Verified elementwise against a frozen numpy/scipy reference in
// tests/data (tolerance 1e-4 relative).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace emoadapt {

struct AudioSignal {
  std::vector<double> samples;
  double sample_rate = 0.0;
};

struct MfccConfig {
  int n_mfcc = 40;
  int n_fft = 2048;
  int hop = 512;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = -1.0;  // -1 resolves to sample_rate / 2
  double log_floor = 1e-10;
  bool center = false;       // reflect-pad by n_fft/2 on both ends
  bool standardize = false;  // per-utterance, per-coefficient z-scoring

  double resolved_fmax(double sample_rate) const {
    return fmax < 0.0 ? sample_rate / 2.0 : fmax;
  }

  void validate(double sample_rate) const {
    if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0)
      throw std::runtime_error("n_fft must be a power of two, got " +
                               std::to_string(n_fft));
    if (hop < 1) throw std::runtime_error("hop must be positive");
    if (n_mfcc < 1 || n_mfcc > n_mels)
      throw std::runtime_error("need 1 <= n_mfcc <= n_mels");
    if (log_floor <= 0.0) throw std::runtime_error("log_floor must be > 0");
    const double fx = resolved_fmax(sample_rate);
    if (!(fmin >= 0.0 && fmin < fx && fx <= sample_rate / 2.0 + 1e-9))
      throw std::runtime_error("need 0 <= fmin < fmax <= sample_rate/2");
  }
};

// ---------------------------------------------------------------------------
// WAV input (16-bit mono PCM only)
// ---------------------------------------------------------------------------

namespace wav_detail {

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] |
                                    (static_cast<std::uint16_t>(b[1]) << 8));
}

}  // namespace wav_detail

inline AudioSignal read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char tag[4];
  is.read(tag, 4);
  if (!is || std::string(tag, 4) != "RIFF")
    throw std::runtime_error("not a RIFF file: " + path.string());
  wav_detail::get_u32(is);  // RIFF chunk size
  is.read(tag, 4);
  if (!is || std::string(tag, 4) != "WAVE")
    throw std::runtime_error("not a WAVE file: " + path.string());

  AudioSignal sig;
  bool have_fmt = false;
  while (is.read(tag, 4)) {
    const std::uint32_t size = wav_detail::get_u32(is);
    const std::string id(tag, 4);
    if (id == "fmt ") {
      const std::uint16_t format = wav_detail::get_u16(is);
      const std::uint16_t channels = wav_detail::get_u16(is);
      const std::uint32_t rate = wav_detail::get_u32(is);
      wav_detail::get_u32(is);  // byte rate
      wav_detail::get_u16(is);  // block align
      const std::uint16_t bits = wav_detail::get_u16(is);
      if (format != 1)
        throw std::runtime_error("only PCM WAV supported in " + path.string());
      if (channels != 1)
        throw std::runtime_error("only mono WAV supported in " +
                                 path.string());
      if (bits != 16)
        throw std::runtime_error("only 16-bit WAV supported in " +
                                 path.string());
      sig.sample_rate = static_cast<double>(rate);
      if (size > 16) is.seekg(size - 16, std::ios::cur);  // extension bytes
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt)
        throw std::runtime_error("WAV data before fmt chunk in " +
                                 path.string());
      const std::size_t n = size / 2;
      sig.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint16_t raw = wav_detail::get_u16(is);
        sig.samples[i] =
            static_cast<double>(static_cast<std::int16_t>(raw)) / 32768.0;
      }
      if (!is) throw std::runtime_error("truncated WAV data in " +
                                        path.string());
      return sig;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);  // skip unknown chunk
    }
  }
  throw std::runtime_error("no data chunk in " + path.string());
}

// ---------------------------------------------------------------------------
// FFT (iterative radix-2, in place)
// ---------------------------------------------------------------------------

inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::runtime_error("FFT size must be a power of two");
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * 3.14159265358979323846 /
                       static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Mel filterbank (Slaney area normalization, linear below 1 kHz then log)
// ---------------------------------------------------------------------------

namespace mel_detail {

inline double hz_to_mel(double f) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (f >= min_log_hz) return min_log_mel + std::log(f / min_log_hz) / logstep;
  return f / f_sp;
}

inline double mel_to_hz(double m) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (m >= min_log_mel) return min_log_hz * std::exp(logstep * (m - min_log_mel));
  return f_sp * m;
}

}  // namespace mel_detail

// Rows are filters over the n_fft/2 + 1 rFFT bins.
inline Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft,
                                      double sample_rate, double fmin,
                                      double fmax) {
  const int n_bins = n_fft / 2 + 1;
  Eigen::VectorXd fftfreqs(n_bins);
  for (int i = 0; i < n_bins; ++i)
    fftfreqs(i) = sample_rate / 2.0 * i / (n_bins - 1);

  Eigen::VectorXd mel_f(n_mels + 2);
  const double m_lo = mel_detail::hz_to_mel(fmin);
  const double m_hi = mel_detail::hz_to_mel(fmax);
  for (int i = 0; i < n_mels + 2; ++i)
    mel_f(i) = mel_detail::mel_to_hz(m_lo + (m_hi - m_lo) * i / (n_mels + 1));

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int i = 0; i < n_mels; ++i) {
    const double lo = mel_f(i), mid = mel_f(i + 1), hi = mel_f(i + 2);
    for (int j = 0; j < n_bins; ++j) {
      const double lower = (fftfreqs(j) - lo) / (mid - lo);
      const double upper = (hi - fftfreqs(j)) / (hi - mid);
      w(i, j) = std::max(0.0, std::min(lower, upper));
    }
    w.row(i) *= 2.0 / (hi - lo);  // area normalization
  }
  return w;
}

// ---------------------------------------------------------------------------
// MFCC
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd compute_mfcc(const AudioSignal& signal,
                                    const MfccConfig& cfg = {}) {
  cfg.validate(signal.sample_rate);

  std::vector<double> x = signal.samples;
  if (cfg.center) {
    const int pad = cfg.n_fft / 2;
    if (static_cast<int>(signal.samples.size()) <= pad)
      throw std::runtime_error("signal too short for reflect padding");
    std::vector<double> padded;
    padded.reserve(x.size() + 2 * pad);
    for (int i = pad; i >= 1; --i) padded.push_back(x[i]);
    padded.insert(padded.end(), x.begin(), x.end());
    const int n = static_cast<int>(x.size());
    for (int i = 2; i <= pad + 1; ++i) padded.push_back(x[n - i]);
    x = std::move(padded);
  }
  const long n = static_cast<long>(x.size());
  if (n < cfg.n_fft)
    throw std::runtime_error("signal shorter than one frame (" +
                             std::to_string(signal.samples.size()) + " < " +
                             std::to_string(cfg.n_fft) + ")");
  const long frames = (n - cfg.n_fft) / cfg.hop + 1;

  // Periodic Hann.
  std::vector<double> window(cfg.n_fft);
  for (int i = 0; i < cfg.n_fft; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i /
                                     cfg.n_fft);

  const int n_bins = cfg.n_fft / 2 + 1;
  const Eigen::MatrixXd fb =
      mel_filterbank(cfg.n_mels, cfg.n_fft, signal.sample_rate, cfg.fmin,
                     cfg.resolved_fmax(signal.sample_rate));

  // Orthonormal DCT-II matrix, first n_mfcc rows only.
  Eigen::MatrixXd dct(cfg.n_mfcc, cfg.n_mels);
  for (int k = 0; k < cfg.n_mfcc; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / cfg.n_mels)
                            : std::sqrt(2.0 / cfg.n_mels);
    for (int m = 0; m < cfg.n_mels; ++m)
      dct(k, m) = s * std::cos(3.14159265358979323846 * k * (2 * m + 1) /
                               (2.0 * cfg.n_mels));
  }

  Eigen::MatrixXd out(frames, cfg.n_mfcc);
  std::vector<std::complex<double>> buf(cfg.n_fft);
  Eigen::VectorXd power(n_bins);
  for (long t = 0; t < frames; ++t) {
    const long off = t * cfg.hop;
    for (int i = 0; i < cfg.n_fft; ++i)
      buf[i] = std::complex<double>(x[off + i] * window[i], 0.0);
    fft_inplace(buf);
    for (int i = 0; i < n_bins; ++i) power(i) = std::norm(buf[i]);
    Eigen::VectorXd logmel = (fb * power)
                                 .cwiseMax(cfg.log_floor)
                                 .array()
                                 .log()
                                 .matrix();
    out.row(t) = (dct * logmel).transpose();
  }

  if (cfg.standardize) {
    for (int j = 0; j < out.cols(); ++j) {
      const double mu = out.col(j).mean();
      const double var =
          (out.col(j).array() - mu).square().sum() / out.rows();
      out.col(j) = (out.col(j).array() - mu) / std::sqrt(var + 1e-8);
    }
  }
  return out;
}

}  // namespace emoadapt
