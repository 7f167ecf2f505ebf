// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcse/room.hpp"
#include "mcse/stft.hpp"
#include "mcse/types.hpp"

namespace mcse {

// Sampling ranges for randomized scenes. Defaults cover shoebox rooms from
// 5x5x3 m to 10x10x4 m, reverberation times of 0.1-0.7 s, source distances
// on a 0.5 m grid up to 5 m, a minimum angular separation of 5 degrees
// between the two sources, and mixing SNRs in [-6, 6] dB.
struct SceneRanges {
  Vec3 room_min_m{5.0, 5.0, 3.0};
  Vec3 room_max_m{10.0, 10.0, 4.0};
  Real t60_min_s = 0.1;
  Real t60_max_s = 0.7;
  Real dist_min_m = 0.5;
  Real dist_max_m = 5.0;
  Real dist_step_m = 0.5;
  Real min_doa_separation_deg = 5.0;
  Real snr_min_db = -6.0;
  Real snr_max_db = 6.0;
  int num_mics = 6;
  Real mic_spacing_m = 0.05;

  void validate() const;
};

// Everything needed to realize one scene deterministically.
struct SceneSpec {
  std::string speech_source;  // wav path; empty when waveforms are passed in
  std::string noise_source;
  SceneRanges ranges;
  int sample_rate_hz = 16000;
  DelayInterp interp = DelayInterp::kNearest;
  std::uint64_t seed = 0;
};

// A drawn scene: room plus the two source placements. `room` carries the
// speech source; noise_room() swaps in the noise source position.
struct SceneLayout {
  RoomSpec room;
  Vec3 noise_pos_m = Vec3::Zero();
  Real speech_doa_deg = 0.0;
  Real noise_doa_deg = 0.0;
  Real speech_dist_m = 0.0;
  Real noise_dist_m = 0.0;
  Real snr_db = 0.0;
  std::uint64_t seed = 0;

  RoomSpec noise_room() const;
};

struct SceneMeta {
  Real target_doa_deg = 0.0;
  Real noise_doa_deg = 0.0;
  Real snr_db = 0.0;
  Real t60_s = 0.0;
  Vec3 room_dims_m = Vec3::Zero();
  Vec3 speech_pos_m = Vec3::Zero();
  Vec3 noise_pos_m = Vec3::Zero();
  std::vector<Vec3> mic_positions_m;
  Real speech_dist_m = 0.0;
  Real noise_dist_m = 0.0;
  std::uint64_t seed = 0;
  Real norm_gain = 1.0;  // global scale applied to every component
  Real split_ms = 2.5;
  DelayInterp interp = DelayInterp::kNearest;
  int sample_rate_hz = 16000;

  Real doa_diff_deg() const;
};

// One emitted training pair. The mixture equals
// direct_speech_image + reverberant_speech_tail + reverberant_noise
// samplewise, and the anechoic target is the reference channel of the
// direct speech image so it stays time-aligned with the mixture.
struct MixturePair {
  std::string id;  // assigned positionally by build_manifest, kept on load
  MultichannelWaveform mixture;
  Waveform anechoic_target;
  MultichannelWaveform direct_speech_image;
  MultichannelWaveform reverberant_speech_tail;
  MultichannelWaveform reverberant_noise;
  SceneMeta meta;
};

// Convolution of a dry source with a multichannel RIR, split at
// `split_ms` after each channel's direct-path arrival. direct + tail equals
// the full convolution exactly; both are truncated to the dry length.
struct SpatializedSource {
  MultichannelWaveform direct;
  MultichannelWaveform tail;
};

// Samples a room, array placement, and two source positions from `spec`
// (one RNG stream, fixed draw order, so a seed pins the whole layout).
// Draws violating wall margins, the DOA separation, or the shortest
// Sabine-reachable decay time for the drawn room are rejected and redrawn;
// persistent failure raises GenerationFailedError.
SceneLayout draw_scene(const SceneSpec& spec);

SpatializedSource spatialize(const Waveform& dry, const Rir& rir,
                             Real split_ms = 2.5);

// Scales the noise image so the reference-channel SNR between reverberant
// speech (direct + tail) and noise equals snr_db, then assembles the
// mixture. A global gain keeps the mixture peak at or below 0.99 and is
// recorded in meta.norm_gain. Geometry metadata is left for the caller.
MixturePair mix_at_snr(const SpatializedSource& speech,
                       const MultichannelWaveform& noise_rev, Real snr_db);

// Full synthesis for a drawn layout: simulates both RIRs, spatializes,
// mixes at the layout's SNR, and fills in the geometry metadata. The noise
// is tiled or trimmed to the speech length.
MixturePair synthesize_pair(const SceneLayout& layout, const Waveform& speech,
                            const Waveform& noise, Real split_ms = 2.5);

// Reference-channel SNR of an assembled pair, in dB.
Real measure_snr_db(const MixturePair& pair);

// DOA-difference bin: "0-15", "15-45", "45-90", or "90-180" (degrees,
// lower edge inclusive).
std::string doa_bin_label(Real doa_diff_deg);

// Writes each pair's components as float32 WAV files under
// out_dir/scene_00000/... and a manifest.json indexing them with metadata.
// Paths inside the manifest are relative to the manifest location. Returns
// the manifest path.
std::filesystem::path build_manifest(const std::vector<MixturePair>& pairs,
                                     const std::filesystem::path& out_dir);

std::vector<MixturePair> load_manifest(
    const std::filesystem::path& manifest_path);

// Deterministic surrogate sources for tests and self-contained dataset
// generation: an amplitude-modulated harmonic complex with drifting pitch
// and syllabic gating, and a band-shaped noise bed.
Waveform synthetic_speech(Real duration_s, int sample_rate_hz,
                          std::uint64_t seed);
Waveform synthetic_noise(Real duration_s, int sample_rate_hz,
                         std::uint64_t seed);

}  // namespace mcse
