// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mcse/room.hpp"
#include "mcse/stft.hpp"
#include "mcse/types.hpp"

namespace mcse {

// Per-frequency spatial covariance, one Hermitian M x M matrix per bin.
struct SpatialCovariance {
  std::vector<ComplexMat> per_freq;

  Index num_bins() const { return static_cast<Index>(per_freq.size()); }
  Index num_mics() const {
    return per_freq.empty() ? 0 : per_freq[0].rows();
  }
};

// Per-frame, per-frequency covariance track from a recursive update.
struct FrameCovariance {
  std::vector<ComplexMat> data;  // frame-major: data[t * num_bins + f]
  Index num_frames = 0;
  Index num_bins = 0;

  const ComplexMat& at(Index t, Index f) const {
    return data.at(static_cast<size_t>(t * num_bins + f));
  }
};

// Relative transfer function: row f holds c_f with the reference element
// (channel 0) pinned to exactly 1.
struct Rtf {
  ComplexMat vectors;  // F x M
  std::vector<bool> low_eigen_gap;  // set by eigenvector estimation only

  Index num_bins() const { return vectors.rows(); }
  Index num_mics() const { return vectors.cols(); }
};

// Beamformer weights per frequency; one matrix for time-invariant filters,
// one per frame otherwise. apply_beamformer conjugates, i.e. output is w^H x.
struct BeamformerWeights {
  std::vector<ComplexMat> w;  // each F x M

  bool time_invariant() const { return w.size() == 1; }
  Index num_frames() const { return static_cast<Index>(w.size()); }
  Index num_bins() const { return w.empty() ? 0 : w[0].rows(); }
  Index num_mics() const { return w.empty() ? 0 : w[0].cols(); }
};

// Batch covariance: mean over frames of x_f x_f^H, Hermitian by construction.
SpatialCovariance estimate_covariance(const MultichannelSpectrogram& spec);

// First-order recursive covariance, Phi_t = lambda Phi_{t-1} +
// (1 - lambda) x_t x_t^H, initialized with the first frame's outer product.
FrameCovariance recursive_covariance(const MultichannelSpectrogram& spec,
                                     Real lambda = 0.95);

// RTF as the principal eigenvector of a speech covariance, normalized to the
// reference channel. Bins whose top-two eigenvalue ratio falls below
// `gap_threshold` are flagged; a degenerate reference entry falls back to the
// reference selector so normalization stays defined.
Rtf estimate_rtf(const SpatialCovariance& cov_speech,
                 Real gap_threshold = 10.0);

// RTF of the direct propagation path: a 2.5 ms segment anchored just before
// the earliest arrival is cut from every channel at the same absolute
// offset, transformed, and divided by the reference channel.
Rtf direct_path_rtf(const Rir& rir, const StftConfig& cfg);

// Far-field RTF at the bin centers of `cfg` for a plane wave from theta.
Rtf steering_rtf(const ArrayGeometry& array, Real theta_rad,
                 const StftConfig& cfg, int sample_rate_hz,
                 Real speed_of_sound = kSpeedOfSound);

// Minimum-variance distortionless response: w = Phi^-1 c / (c^H Phi^-1 c)
// per bin, with diagonal loading `loading * trace(Phi)/M`.
BeamformerWeights mvdr_weights(const SpatialCovariance& cov_noise,
                               const Rtf& rtf, Real loading = 1e-6);

// Multichannel Wiener filter targeting the reference channel:
// w = (Phi_s + Phi_n)^-1 Phi_s e_ref per bin, same loading rule applied to
// the summed covariance.
BeamformerWeights mwf_weights(const SpatialCovariance& cov_speech,
                              const SpatialCovariance& cov_noise,
                              Real loading = 1e-6);

// Frame-recursive MVDR: covariance tracks for speech and interference are
// updated per frame and the RTF is re-estimated from the speech track, so
// every frame carries its own weights.
BeamformerWeights frame_mvdr(const MultichannelSpectrogram& oracle_speech,
                             const MultichannelSpectrogram& interference,
                             Real lambda = 0.95, Real loading = 1e-6);

// Applies w^H x per (t, f). Weight layout must match the spectrogram.
Spectrogram apply_beamformer(const BeamformerWeights& weights,
                             const MultichannelSpectrogram& spec);

struct Beampattern {
  RealVec angles_rad;
  RealVec freqs_hz;  // snapped to bin centers
  RealMat db;        // angles x freqs, 20 log10 |w_f^H d(theta, f)|
};

// Spatial response of per-bin weights against far-field steering vectors.
// Requested frequencies snap to the nearest bin center.
Beampattern beampattern(const ComplexMat& weights_fm,
                        const ArrayGeometry& array, const RealVec& angles_rad,
                        const RealVec& freqs_hz, int sample_rate_hz,
                        int fft_len, Real speed_of_sound = kSpeedOfSound);

}  // namespace mcse
