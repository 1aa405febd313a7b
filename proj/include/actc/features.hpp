#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "actc/common.hpp"
#include "actc/io.hpp"

namespace actc {

struct FeatureMatrix {
  Eigen::MatrixXd frames;  // T x D
  double frame_shift = 0.0;
  std::string source;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

inline void save_features(const std::string& path, const FeatureMatrix& f) {
  write_matrix_file(path, "FEAT", f.frames);
}

inline FeatureMatrix load_features(const std::string& path, double frame_shift = 0.0) {
  FeatureMatrix f;
  f.frames = read_matrix_file(path, "FEAT");
  f.frame_shift = frame_shift;
  f.source = path;
  return f;
}

namespace detail {

// In-place iterative radix-2 FFT. n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace detail

// Triangular mel filterbank over FFT bins 0..n_fft/2, spanning 0 to Nyquist.
inline Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, double sample_rate) {
  ACTC_CHECK(n_mels >= 1, "n_mels must be >= 1");
  const int n_bins = n_fft / 2 + 1;
  const double mel_max = detail::hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int m = 0; m < n_mels + 2; ++m)
    edges[static_cast<size_t>(m)] = detail::mel_to_hz(mel_max * m / (n_mels + 1));
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<size_t>(m)];
    const double center = edges[static_cast<size_t>(m) + 1];
    const double hi = edges[static_cast<size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = sample_rate * k / n_fft;
      if (f > lo && f < center)
        fb(m, k) = (f - lo) / (center - lo);
      else if (f >= center && f < hi)
        fb(m, k) = (hi - f) / (hi - center);
    }
  }
  return fb;
}

// Center frequency of mel band m (used by tests to construct probe tones).
inline double mel_band_center_hz(int band, int n_mels, double sample_rate) {
  const double mel_max = detail::hz_to_mel(sample_rate / 2.0);
  return detail::mel_to_hz(mel_max * (band + 1) / (n_mels + 1));
}

constexpr double kLogMelFloor = 1e-10;

// Hamming window, power spectrum via radix-2 DFT of length next_pow2(window),
// triangular mel filters, natural log floored at kLogMelFloor.
inline FeatureMatrix logmel(const std::vector<double>& waveform, double sample_rate,
                            double window_sec = 0.025, double hop_sec = 0.010, int n_mels = 40) {
  ACTC_CHECK(sample_rate > 0, "sample_rate must be positive");
  ACTC_CHECK(hop_sec > 0 && window_sec >= hop_sec, "need window >= hop > 0");
  const size_t win = static_cast<size_t>(std::lround(window_sec * sample_rate));
  const size_t hop = static_cast<size_t>(std::lround(hop_sec * sample_rate));
  if (waveform.size() < win) throw std::invalid_argument("too short");

  size_t n_fft = 1;
  while (n_fft < win) n_fft <<= 1;
  const int n_bins = static_cast<int>(n_fft / 2 + 1);
  const Eigen::Index n_frames = 1 + static_cast<Eigen::Index>((waveform.size() - win) / hop);

  std::vector<double> window(win);
  for (size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));

  const Eigen::MatrixXd fb = mel_filterbank(n_mels, static_cast<int>(n_fft), sample_rate);

  FeatureMatrix out;
  out.frames.resize(n_frames, n_mels);
  out.frame_shift = hop_sec;
  std::vector<std::complex<double>> buf(n_fft);
  Eigen::VectorXd power(n_bins);
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const size_t start = static_cast<size_t>(t) * hop;
    for (size_t i = 0; i < n_fft; ++i)
      buf[i] = i < win ? std::complex<double>(waveform[start + i] * window[i], 0.0)
                       : std::complex<double>(0.0, 0.0);
    detail::fft_radix2(buf);
    for (int k = 0; k < n_bins; ++k) power(k) = std::norm(buf[static_cast<size_t>(k)]);
    Eigen::VectorXd mel = fb * power;
    for (int m = 0; m < n_mels; ++m)
      out.frames(t, m) = std::log(std::max(mel(m), kLogMelFloor));
  }
  return out;
}

// Output frame k concatenates input frames k*decimate .. k*decimate+stack-1.
// With stack=2, decimate=2 this is the usual stacking+decimation that halves
// the frame rate and doubles the dimension; a trailing odd frame is dropped.
inline FeatureMatrix stack_decimate(const FeatureMatrix& f, int stack = 2, int decimate = 2) {
  ACTC_CHECK(stack >= 1 && decimate >= 1, "stack and decimate must be >= 1");
  const Eigen::Index t_in = f.num_frames();
  const Eigen::Index d = f.dim();
  if (t_in < stack) throw std::invalid_argument("fewer frames than stack size");
  const Eigen::Index t_out = (t_in - stack) / decimate + 1;
  FeatureMatrix out;
  out.frames.resize(t_out, d * stack);
  out.frame_shift = f.frame_shift * decimate;
  out.source = f.source;
  for (Eigen::Index k = 0; k < t_out; ++k)
    for (int s = 0; s < stack; ++s)
      out.frames.block(k, s * d, 1, d) = f.frames.row(k * decimate + s);
  return out;
}

// Appends the same speaker vector to every frame (i-vector slot; the vector
// itself is supplied by the caller, possibly all zeros).
inline FeatureMatrix append_speaker_vector(const FeatureMatrix& f, const Eigen::VectorXd& s) {
  for (Eigen::Index i = 0; i < s.size(); ++i)
    ACTC_CHECK(std::isfinite(s(i)), "speaker vector must be finite");
  FeatureMatrix out;
  out.frames.resize(f.num_frames(), f.dim() + s.size());
  out.frames.leftCols(f.dim()) = f.frames;
  out.frames.rightCols(s.size()) = s.transpose().replicate(f.num_frames(), 1);
  out.frame_shift = f.frame_shift;
  out.source = f.source;
  return out;
}

// Single-channel 16-bit PCM WAV reader. Samples are scaled to [-1, 1).
struct WavData {
  std::vector<double> samples;
  double sample_rate = 0.0;
};

inline WavData read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char riff[4], wave[4];
  is.read(riff, 4);
  read_u32(is);  // total size
  is.read(wave, 4);
  if (!is || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);
  WavData wav;
  uint16_t channels = 0, bits = 0;
  bool got_fmt = false;
  while (is) {
    char tag[4];
    is.read(tag, 4);
    if (!is) break;
    uint32_t chunk_size = read_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::vector<char> body(chunk_size);
      is.read(body.data(), chunk_size);
      if (chunk_size < 16) throw std::runtime_error("bad fmt chunk: " + path);
      uint16_t format = static_cast<uint16_t>(static_cast<unsigned char>(body[0]) |
                                              (static_cast<unsigned char>(body[1]) << 8));
      channels = static_cast<uint16_t>(static_cast<unsigned char>(body[2]) |
                                       (static_cast<unsigned char>(body[3]) << 8));
      uint32_t rate = static_cast<uint32_t>(static_cast<unsigned char>(body[4])) |
                      (static_cast<uint32_t>(static_cast<unsigned char>(body[5])) << 8) |
                      (static_cast<uint32_t>(static_cast<unsigned char>(body[6])) << 16) |
                      (static_cast<uint32_t>(static_cast<unsigned char>(body[7])) << 24);
      bits = static_cast<uint16_t>(static_cast<unsigned char>(body[14]) |
                                   (static_cast<unsigned char>(body[15]) << 8));
      if (format != 1) throw std::runtime_error("only PCM WAV supported: " + path);
      if (channels != 1) throw std::runtime_error("only mono WAV supported: " + path);
      if (bits != 16) throw std::runtime_error("only 16-bit WAV supported: " + path);
      wav.sample_rate = rate;
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw std::runtime_error("data chunk before fmt: " + path);
      const size_t n = chunk_size / 2;
      wav.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        unsigned char b[2];
        is.read(reinterpret_cast<char*>(b), 2);
        int16_t s = static_cast<int16_t>(b[0] | (b[1] << 8));
        wav.samples[i] = s / 32768.0;
      }
      return wav;
    } else {
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw std::runtime_error("no data chunk: " + path);
}

inline void write_wav(const std::string& path, const std::vector<double>& samples,
                      double sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  const uint32_t rate = static_cast<uint32_t>(std::lround(sample_rate));
  unsigned char fmt[16] = {1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 0, 16, 0};
  fmt[4] = static_cast<unsigned char>(rate);
  fmt[5] = static_cast<unsigned char>(rate >> 8);
  fmt[6] = static_cast<unsigned char>(rate >> 16);
  fmt[7] = static_cast<unsigned char>(rate >> 24);
  const uint32_t byte_rate = rate * 2;
  fmt[8] = static_cast<unsigned char>(byte_rate);
  fmt[9] = static_cast<unsigned char>(byte_rate >> 8);
  fmt[10] = static_cast<unsigned char>(byte_rate >> 16);
  fmt[11] = static_cast<unsigned char>(byte_rate >> 24);
  os.write(reinterpret_cast<const char*>(fmt), 16);
  os.write("data", 4);
  write_u32(os, data_bytes);
  for (double v : samples) {
    // quantize with the same 1/32768 step the reader uses, clamped to int16
    const long q = std::lround(std::max(-1.0, std::min(1.0, v)) * 32768.0);
    const int16_t s = static_cast<int16_t>(std::max(-32768L, std::min(32767L, q)));
    unsigned char b[2] = {static_cast<unsigned char>(s & 0xff),
                          static_cast<unsigned char>((s >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
}

}  // namespace actc
