// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mcse/errors.hpp"
#include "mcse/types.hpp"

namespace mcse {

struct ArrayGeometry {
  std::vector<Vec3> mic_positions;  // meters, absolute

  // Uniform linear array along +x, centered at the origin. Channel 0 sits at
  // the most negative x and is the reference channel.
  static ArrayGeometry ula(int num_mics = 6, Real spacing_m = 0.05);

  ArrayGeometry translated(const Vec3& offset) const;
  Vec3 center() const;
  Index num_mics() const { return static_cast<Index>(mic_positions.size()); }
};

enum class DelayInterp { kNearest, kSinc };

// Shoebox room with one point source and a rigid microphone array. Wall
// reflectivity is uniform across all six walls, derived from the requested
// reverberation time by Sabine's formula.
struct RoomSpec {
  Vec3 dims_m{6.0, 5.0, 3.0};
  Real t60_s = 0.5;  // 0 disables all reflections
  Vec3 source_pos_m{2.0, 3.0, 1.5};
  ArrayGeometry array;
  int max_order = -1;  // reflection-count cap; < 0 selects automatically
  Real speed_of_sound = kSpeedOfSound;
  int sample_rate_hz = 16000;
  DelayInterp interp = DelayInterp::kNearest;

  void validate() const;
};

struct Rir {
  RealArr2 channels;  // M x L
  int sample_rate_hz = 16000;
  std::vector<Index> direct_path_delays;  // geometric, in samples

  Index num_channels() const { return channels.rows(); }
  Index num_taps() const { return channels.cols(); }
};

// Image-method simulation. Source images are enumerated out to 1.2x the
// requested decay time (per-dimension lattice order capped at 30); each image
// contributes gain beta^bounces / (4 pi d) at its propagation delay, placed
// on the nearest sample or spread with a windowed-sinc interpolator.
Rir simulate_rir(const RoomSpec& room);

// Direct propagation path only (no reflections), same tap placement rules.
Rir direct_path_rir(const RoomSpec& room);

// Reverberation time via Schroeder backward integration: the energy decay
// curve is fit on its -5 to -25 dB span and extrapolated to -60 dB. Returns
// the mean across channels.
Real estimate_t60(const Rir& rir);

// Shortest reverberation time Sabine's formula can realize for a shoebox of
// these dimensions; shorter targets would need wall absorption above 1 and
// make simulate_rir throw.
Real min_sabine_t60(const Vec3& dims_m, Real speed_of_sound = kSpeedOfSound);

// Far-field steering vector for a plane wave from direction theta (radians,
// measured from the +x array axis in the xy plane; pi/2 is broadside).
// Element m is exp(-j 2 pi f tau_m) with tau_m the arrival delay of mic m
// relative to mic 0.
ComplexVec steering_vector(const ArrayGeometry& array, Real theta_rad,
                           Real freq_hz, Real speed_of_sound = kSpeedOfSound);

// Persistence: `path_base`.wav (float32) plus `path_base`.json sidecar with
// the generating geometry.
void write_rir(const std::string& path_base, const Rir& rir,
               const RoomSpec& room);
Rir read_rir(const std::string& path_base, RoomSpec* room_out = nullptr);

}  // namespace mcse
