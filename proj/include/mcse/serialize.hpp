// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "mcse/beamform.hpp"
#include "mcse/stft.hpp"
#include "mcse/types.hpp"

namespace mcse {

// Shared on-disk container for complex tensors:
//
//   [4-byte little-endian uint32: JSON header length]
//   [UTF-8 JSON header]
//   [payload: little-endian float32 pairs (real, imag) per element]
//
// Header fields:
//   kind            "beamformer_weights" or "spectrogram"
//   schema_version  1
//   dtype           "complex64-interleaved"
//   layout          element order, outermost axis first
//   shape           axis sizes matching the layout
//   meta            string-to-string map with free-form run configuration
//
// Spectrogram headers additionally carry sample_rate_hz and the analysis
// parameters (window_len, hop_len, fft_len, window).

struct WeightsFile {
  BeamformerWeights weights;
  std::map<std::string, std::string> meta;
};

struct SpectrogramFile {
  Spectrogram spec;
  std::map<std::string, std::string> meta;
};

// Writes `weights` with layout "frame,bin,mic". Values narrow to float32.
void write_weights(const std::string& path, const BeamformerWeights& weights,
                   const std::map<std::string, std::string>& meta = {});

// Reads a "beamformer_weights" container. Throws IoError on missing,
// truncated, or mismatched files.
WeightsFile read_weights(const std::string& path);

// Writes `spec` with layout "frame,bin"; used to dump intermediate spectra
// in the same container format as weights.
void write_spectrogram(const std::string& path, const Spectrogram& spec,
                       const std::map<std::string, std::string>& meta = {});

SpectrogramFile read_spectrogram(const std::string& path);

// CSV export: one "theta_deg,freq_hz,db" header line, then one row per
// (angle, frequency) pair with angles outermost. Angles are in degrees.
void write_beampattern_csv(const std::string& path, const Beampattern& bp);

}  // namespace mcse
