// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcse/stft.hpp"
#include "mcse/types.hpp"

namespace mcse {

// Scale-invariant SDR in dB: project est onto ref (a = <est,ref>/||ref||^2)
// and compare ||a ref||^2 against ||a ref - est||^2. Capped at +100 dB
// (exact match) and floored at -100 dB (orthogonal or zero estimate) so
// reports stay finite.
Real si_sdr(const Waveform& est, const Waveform& ref);

// Mean over active frames of the per-frame scale-invariant SNR, each value
// clamped to [-10, 35] dB. Frames are non-overlapping windows of frame_ms;
// a frame is active when its reference energy is at least 1e-4 times the
// peak frame energy.
Real segmental_snr(const Waveform& est, const Waveform& ref,
                   Real frame_ms = 20.0);

struct UtteranceEval {
  std::string id;
  std::string doa_bin;
  Real t60_s = 0.0;
  Real snr_in_db = 0.0;
  Real si_sdr_db = 0.0;
  Real seg_snr_db = 0.0;
  // Reserved for externally computed perceptual scores; never filled here.
  std::optional<Real> pesq;
  std::optional<Real> estoi;
  std::optional<Real> dnsmos;
};

struct BinStats {
  std::string label;
  int count = 0;
  Real mean_si_sdr_db = 0.0;  // meaningful only when count > 0
  Real mean_seg_snr_db = 0.0;
};

struct EvalReport {
  std::vector<UtteranceEval> utterances;  // sorted by id
  std::vector<BinStats> per_bin;          // fixed order: 0-15, 15-45, 45-90, 90-180
  int total = 0;
  Real mean_si_sdr_db = 0.0;
  Real mean_seg_snr_db = 0.0;
};

// Builds the report for a dataset: for each manifest entry, reads
// outputs_dir/<id>.wav and scores it against the anechoic target (both
// trimmed to the shorter length, since synthesis frames round the tail).
// Missing outputs are collected and reported together.
EvalReport evaluate_manifest(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& outputs_dir);

// Report built from already-scored utterances (aggregation only).
EvalReport aggregate_report(std::vector<UtteranceEval> utterances);

// Per-utterance rows as CSV (header line first, reserved columns empty).
void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path);

// Full structure (utterances, per-bin, global means) as JSON.
void write_report_json(const EvalReport& report,
                       const std::filesystem::path& path);

}  // namespace mcse
