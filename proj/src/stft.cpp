// SPDX-License-Identifier: Apache-2.0
#include "mcse/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

namespace mcse {

namespace {

constexpr Real kOverlapGuard = 1e-8;

// Reflect index i into [0, n), bouncing off both edges (even symmetry about
// the end samples, numpy "reflect" style).
Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  Index r = i % period;
  if (r < 0) r += period;
  return r < n ? r : period - r;
}

std::vector<Complex> full_spectrum(const ComplexArr2& data, Index t,
                                   int fft_len) {
  const Index f_bins = data.cols();
  std::vector<Complex> full(static_cast<size_t>(fft_len));
  for (Index k = 0; k < f_bins; ++k) full[static_cast<size_t>(k)] = data(t, k);
  for (Index k = 1; k < fft_len - f_bins + 1; ++k)
    full[static_cast<size_t>(fft_len - k)] = std::conj(data(t, k));
  return full;
}

}  // namespace

void StftConfig::validate() const {
  if (window_len <= 0 || hop_len <= 0 || fft_len <= 0)
    throw InvalidInputError("StftConfig: sizes must be positive");
  if (hop_len > window_len)
    throw InvalidInputError("StftConfig: hop_len must not exceed window_len");
  if (window_len > fft_len)
    throw InvalidInputError("StftConfig: window_len must not exceed fft_len");
}

MultichannelWaveform MultichannelWaveform::from_channels(
    const std::vector<Waveform>& chans) {
  if (chans.empty())
    throw InvalidInputError("from_channels: empty channel list");
  MultichannelWaveform out;
  out.sample_rate_hz = chans[0].sample_rate_hz;
  out.samples.resize(static_cast<Index>(chans.size()),
                     chans[0].samples.size());
  for (size_t m = 0; m < chans.size(); ++m) {
    if (chans[m].samples.size() != out.samples.cols() ||
        chans[m].sample_rate_hz != out.sample_rate_hz)
      throw InvalidInputError("from_channels: mismatched channels");
    out.samples.row(static_cast<Index>(m)) = chans[m].samples.transpose();
  }
  return out;
}

RealArr make_window(WindowKind kind, int length) {
  if (length <= 0) throw InvalidInputError("make_window: length must be > 0");
  RealArr w(length);
  switch (kind) {
    case WindowKind::kHann:
      for (int n = 0; n < length; ++n)
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
      break;
    case WindowKind::kRect:
      w.setOnes();
      break;
  }
  return w;
}

Spectrogram stft(const Waveform& wave, const StftConfig& cfg) {
  cfg.validate();
  const Index n = wave.num_samples();
  if (n < cfg.window_len)
    throw InvalidInputError("stft: signal shorter than one window (" +
                            std::to_string(n) + " < " +
                            std::to_string(cfg.window_len) + ")");

  const Index half = cfg.window_len / 2;
  const Index align = (cfg.hop_len - n % cfg.hop_len) % cfg.hop_len;
  const Index padded_len = n + 2 * half + align;
  RealArr padded(padded_len);
  for (Index i = 0; i < padded_len; ++i)
    padded[i] = wave.samples[reflect_index(i - half, n)];

  const RealArr window = make_window(cfg.window, cfg.window_len);
  const Index num_frames = (padded_len - cfg.window_len) / cfg.hop_len + 1;
  const Index f_bins = cfg.num_bins();

  Spectrogram out;
  out.config = cfg;
  out.sample_rate_hz = wave.sample_rate_hz;
  out.data.resize(num_frames, f_bins);

  Eigen::FFT<Real> fft;
  std::vector<Complex> buf(static_cast<size_t>(cfg.fft_len));
  std::vector<Complex> spec(static_cast<size_t>(cfg.fft_len));
  for (Index t = 0; t < num_frames; ++t) {
    const Index start = t * cfg.hop_len;
    for (int i = 0; i < cfg.window_len; ++i)
      buf[static_cast<size_t>(i)] = Complex(padded[start + i] * window[i], 0.0);
    std::fill(buf.begin() + cfg.window_len, buf.end(), Complex(0.0, 0.0));
    fft.fwd(spec, buf);
    for (Index k = 0; k < f_bins; ++k)
      out.data(t, k) = spec[static_cast<size_t>(k)];
  }
  return out;
}

MultichannelSpectrogram stft(const MultichannelWaveform& wave,
                             const StftConfig& cfg) {
  MultichannelSpectrogram out;
  out.config = cfg;
  out.sample_rate_hz = wave.sample_rate_hz;
  out.channels.reserve(static_cast<size_t>(wave.num_channels()));
  for (Index m = 0; m < wave.num_channels(); ++m)
    out.channels.push_back(stft(wave.channel(m), cfg).data);
  return out;
}

Waveform istft(const Spectrogram& spec, const StftConfig& cfg,
               Index num_samples) {
  cfg.validate();
  if (spec.data.cols() != cfg.num_bins())
    throw InvalidInputError("istft: spectrogram has " +
                            std::to_string(spec.data.cols()) +
                            " bins, config expects " +
                            std::to_string(cfg.num_bins()));
  const Index num_frames = spec.data.rows();
  if (num_frames < 2) throw InvalidInputError("istft: need at least 2 frames");

  const Index padded_len = (num_frames - 1) * cfg.hop_len + cfg.window_len;
  const Index full_len = (num_frames - 1) * cfg.hop_len;
  const Index out_len = num_samples >= 0 ? num_samples : full_len;
  if (out_len > full_len)
    throw InvalidInputError("istft: num_samples exceeds " +
                            std::to_string(full_len));

  const RealArr window = make_window(cfg.window, cfg.window_len);
  RealArr acc = RealArr::Zero(padded_len);
  RealArr norm = RealArr::Zero(padded_len);

  Eigen::FFT<Real> fft;
  std::vector<Complex> frame(static_cast<size_t>(cfg.fft_len));
  for (Index t = 0; t < num_frames; ++t) {
    const std::vector<Complex> full = full_spectrum(spec.data, t, cfg.fft_len);
    fft.inv(frame, full);
    const Index start = t * cfg.hop_len;
    for (int i = 0; i < cfg.window_len; ++i) {
      acc[start + i] += window[i] * frame[static_cast<size_t>(i)].real();
      norm[start + i] += window[i] * window[i];
    }
  }

  Waveform out;
  out.sample_rate_hz = spec.sample_rate_hz;
  const Index half = cfg.window_len / 2;
  out.samples = acc.segment(half, out_len) /
                norm.segment(half, out_len).max(kOverlapGuard);
  return out;
}

MultichannelWaveform istft(const MultichannelSpectrogram& spec,
                           const StftConfig& cfg, Index num_samples) {
  if (spec.channels.empty())
    throw InvalidInputError("istft: no channels");
  std::vector<Waveform> chans;
  chans.reserve(spec.channels.size());
  for (Index m = 0; m < spec.num_channels(); ++m)
    chans.push_back(istft(spec.channel(m), cfg, num_samples));
  return MultichannelWaveform::from_channels(chans);
}

Spectrogram compress_power(const Spectrogram& spec, Real factor) {
  if (!(factor > 0.0) || factor > 1.0)
    throw InvalidInputError("compress_power: factor must be in (0, 1]");
  if (factor == 1.0) return spec;
  Spectrogram out = spec;
  for (Index t = 0; t < spec.data.rows(); ++t) {
    for (Index f = 0; f < spec.data.cols(); ++f) {
      const Complex z = spec.data(t, f);
      const Real mag = std::abs(z);
      out.data(t, f) =
          mag > 0.0 ? std::polar(std::pow(mag, factor), std::arg(z))
                    : Complex(0.0, 0.0);
    }
  }
  return out;
}

RealArr fft_convolve(const RealArr& a, const RealArr& b) {
  if (a.size() == 0 || b.size() == 0)
    throw InvalidInputError("fft_convolve: empty input");
  const Index out_len = a.size() + b.size() - 1;
  Index n = 1;
  while (n < out_len) n <<= 1;

  std::vector<Complex> fa(static_cast<size_t>(n), Complex(0.0, 0.0));
  std::vector<Complex> fb(static_cast<size_t>(n), Complex(0.0, 0.0));
  for (Index i = 0; i < a.size(); ++i) fa[static_cast<size_t>(i)] = a[i];
  for (Index i = 0; i < b.size(); ++i) fb[static_cast<size_t>(i)] = b[i];

  Eigen::FFT<Real> fft;
  std::vector<Complex> sa(static_cast<size_t>(n));
  std::vector<Complex> sb(static_cast<size_t>(n));
  fft.fwd(sa, fa);
  fft.fwd(sb, fb);
  for (size_t i = 0; i < sa.size(); ++i) sa[i] *= sb[i];
  fft.inv(fa, sa);

  RealArr out(out_len);
  for (Index i = 0; i < out_len; ++i)
    out[i] = fa[static_cast<size_t>(i)].real();
  return out;
}

}  // namespace mcse
