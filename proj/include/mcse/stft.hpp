// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mcse/errors.hpp"
#include "mcse/types.hpp"

namespace mcse {

enum class WindowKind { kHann, kRect };

// Analysis/synthesis parameters. Defaults follow the 16 kHz wideband setup:
// 20 ms window, 50% overlap, 320-point transform, 161 retained bins.
struct StftConfig {
  int window_len = 320;
  int hop_len = 160;
  int fft_len = 320;
  WindowKind window = WindowKind::kHann;

  Index num_bins() const { return fft_len / 2 + 1; }
  void validate() const;
};

struct Waveform {
  RealArr samples;
  int sample_rate_hz = 16000;

  Index num_samples() const { return samples.size(); }
};

// Channel-major multichannel audio: row m holds channel m. Channel 0 is the
// reference channel everywhere in this library.
struct MultichannelWaveform {
  RealArr2 samples;  // M x N
  int sample_rate_hz = 16000;

  Index num_channels() const { return samples.rows(); }
  Index num_samples() const { return samples.cols(); }
  Waveform channel(Index m) const {
    return Waveform{samples.row(m).transpose(), sample_rate_hz};
  }
  static MultichannelWaveform from_channels(const std::vector<Waveform>& chans);
};

// Frame-major complex spectrogram: data(t, f), t in [0, T), f in [0, F).
struct Spectrogram {
  ComplexArr2 data;  // T x F
  StftConfig config;
  int sample_rate_hz = 16000;

  Index num_frames() const { return data.rows(); }
  Index num_bins() const { return data.cols(); }
};

struct MultichannelSpectrogram {
  std::vector<ComplexArr2> channels;  // M entries, each T x F
  StftConfig config;
  int sample_rate_hz = 16000;

  Index num_channels() const { return static_cast<Index>(channels.size()); }
  Index num_frames() const { return channels.empty() ? 0 : channels[0].rows(); }
  Index num_bins() const { return channels.empty() ? 0 : channels[0].cols(); }
  Spectrogram channel(Index m) const {
    return Spectrogram{channels.at(static_cast<size_t>(m)), config,
                       sample_rate_hz};
  }
};

// Periodic window of the given kind; length must be positive.
RealArr make_window(WindowKind kind, int length);

// Forward transform. The signal is reflect-padded by window_len/2 on both
// ends (plus tail alignment to a hop multiple), so every input sample gets
// full overlap-add coverage and the round trip is exact to machine precision.
// Frame count is ceil(N / hop) + 1. Requires N >= window_len.
Spectrogram stft(const Waveform& wave, const StftConfig& cfg);
MultichannelSpectrogram stft(const MultichannelWaveform& wave,
                             const StftConfig& cfg);

// Weighted overlap-add inverse. The overlap-add result is normalized by the
// summed squared analysis window, guarded at 1e-8. `num_samples` < 0 yields
// (T - 1) * hop samples; pass the original length to trim exactly.
Waveform istft(const Spectrogram& spec, const StftConfig& cfg,
               Index num_samples = -1);
MultichannelWaveform istft(const MultichannelSpectrogram& spec,
                           const StftConfig& cfg, Index num_samples = -1);

// Magnitude compression |z|^factor with phase preserved. factor in (0, 1];
// factor == 1 returns the input unchanged.
Spectrogram compress_power(const Spectrogram& spec, Real factor);

// Linear convolution via FFT, output length a.size() + b.size() - 1.
RealArr fft_convolve(const RealArr& a, const RealArr& b);

}  // namespace mcse
