// SPDX-License-Identifier: Apache-2.0
#include "mcse/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>

#include <nlohmann/json.hpp>

#include "mcse/errors.hpp"
#include "mcse/rng.hpp"
#include "mcse/wav.hpp"

namespace mcse {

namespace {

using nlohmann::json;

constexpr Real kDegPerRad = 180.0 / std::numbers::pi;
constexpr Real kSourceWallMargin = 0.3;
constexpr Real kArrayWallMargin = 0.5;
constexpr Real kPeakCeiling = 0.99;

Real sum_sq(const RealArr& x) { return (x * x).sum(); }

std::string interp_name(DelayInterp interp) {
  return interp == DelayInterp::kSinc ? "sinc" : "nearest";
}

DelayInterp interp_from_name(const std::string& name) {
  if (name == "sinc") return DelayInterp::kSinc;
  if (name == "nearest") return DelayInterp::kNearest;
  throw InvalidInputError("unknown delay interpolation '" + name + "'");
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  return Vec3(j.at(0).get<Real>(), j.at(1).get<Real>(), j.at(2).get<Real>());
}

}  // namespace

void SceneRanges::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (!(room_min_m[d] > 0.0) || room_max_m[d] < room_min_m[d])
      throw InvalidInputError("scene ranges: room bounds must satisfy 0 < min <= max");
  }
  if (!(t60_min_s >= 0.0) || t60_max_s < t60_min_s)
    throw InvalidInputError("scene ranges: t60 bounds must satisfy 0 <= min <= max");
  if (!(dist_min_m > 0.0) || dist_max_m < dist_min_m || !(dist_step_m > 0.0))
    throw InvalidInputError("scene ranges: distance grid must satisfy 0 < min <= max, step > 0");
  if (min_doa_separation_deg < 0.0 || min_doa_separation_deg > 180.0)
    throw InvalidInputError("scene ranges: DOA separation must lie in [0, 180] degrees");
  if (snr_max_db < snr_min_db)
    throw InvalidInputError("scene ranges: SNR bounds out of order");
  if (num_mics < 1 || !(mic_spacing_m > 0.0))
    throw InvalidInputError("scene ranges: need at least one microphone and positive spacing");
}

RoomSpec SceneLayout::noise_room() const {
  RoomSpec r = room;
  r.source_pos_m = noise_pos_m;
  return r;
}

Real SceneMeta::doa_diff_deg() const {
  return std::abs(target_doa_deg - noise_doa_deg);
}

SceneLayout draw_scene(const SceneSpec& spec) {
  const SceneRanges& r = spec.ranges;
  r.validate();
  Rng rng(spec.seed);

  const Real half_span = 0.5 * (r.num_mics - 1) * r.mic_spacing_m;
  const int num_dist =
      static_cast<int>(std::lround((r.dist_max_m - r.dist_min_m) / r.dist_step_m)) + 1;
  constexpr int kMaxAttempts = 500;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Vec3 dims;
    for (int d = 0; d < 3; ++d) dims[d] = rng.uniform(r.room_min_m[d], r.room_max_m[d]);
    const Real t60 = rng.uniform(r.t60_min_s, r.t60_max_s);
    if (t60 > 0.0 && t60 < min_sabine_t60(dims)) continue;

    const Real cx_lo = kArrayWallMargin + half_span;
    const Real cx_hi = dims.x() - kArrayWallMargin - half_span;
    const Real cy_lo = kArrayWallMargin, cy_hi = dims.y() - kArrayWallMargin;
    const Real cz_lo = kArrayWallMargin, cz_hi = dims.z() - kArrayWallMargin;
    if (cx_hi < cx_lo || cy_hi < cy_lo || cz_hi < cz_lo) continue;
    const Vec3 center(rng.uniform(cx_lo, cx_hi), rng.uniform(cy_lo, cy_hi),
                      rng.uniform(cz_lo, cz_hi));

    const Real dist_s = r.dist_min_m + r.dist_step_m * rng.uniform_int(num_dist);
    const Real theta_s = rng.uniform(0.0, std::numbers::pi);
    const Real dist_n = r.dist_min_m + r.dist_step_m * rng.uniform_int(num_dist);
    const Real theta_n = rng.uniform(0.0, std::numbers::pi);
    const Real snr = rng.uniform(r.snr_min_db, r.snr_max_db);

    if (std::abs(theta_s - theta_n) * kDegPerRad < r.min_doa_separation_deg) continue;

    const auto place = [&](Real dist, Real theta) -> std::optional<Vec3> {
      const Vec3 p = center + dist * Vec3(std::cos(theta), std::sin(theta), 0.0);
      for (int d = 0; d < 3; ++d)
        if (p[d] < kSourceWallMargin || p[d] > dims[d] - kSourceWallMargin)
          return std::nullopt;
      return p;
    };
    const auto speech_pos = place(dist_s, theta_s);
    const auto noise_pos = place(dist_n, theta_n);
    if (!speech_pos || !noise_pos) continue;

    SceneLayout layout;
    layout.room.dims_m = dims;
    layout.room.t60_s = t60;
    layout.room.source_pos_m = *speech_pos;
    layout.room.array = ArrayGeometry::ula(r.num_mics, r.mic_spacing_m).translated(center);
    layout.room.sample_rate_hz = spec.sample_rate_hz;
    layout.room.interp = spec.interp;
    layout.room.validate();
    layout.noise_pos_m = *noise_pos;
    layout.speech_doa_deg = theta_s * kDegPerRad;
    layout.noise_doa_deg = theta_n * kDegPerRad;
    layout.speech_dist_m = dist_s;
    layout.noise_dist_m = dist_n;
    layout.snr_db = snr;
    layout.seed = spec.seed;
    return layout;
  }
  throw GenerationFailedError(
      "draw_scene: no draw satisfied the wall margins, DOA separation, and "
      "reachable decay time after 500 attempts");
}

SpatializedSource spatialize(const Waveform& dry, const Rir& rir, Real split_ms) {
  if (dry.sample_rate_hz != rir.sample_rate_hz)
    throw InvalidInputError("spatialize: sample-rate mismatch between source and RIR");
  if (dry.samples.size() == 0) throw InvalidInputError("spatialize: empty source");
  if (rir.num_channels() == 0 || rir.num_taps() == 0)
    throw InvalidInputError("spatialize: empty RIR");
  if (!(split_ms >= 0.0)) throw InvalidInputError("spatialize: split_ms must be >= 0");

  const Index n = dry.samples.size();
  const Index num_m = rir.num_channels();
  const Index num_taps = rir.num_taps();
  const Index earliest =
      *std::min_element(rir.direct_path_delays.begin(), rir.direct_path_delays.end());
  const Index cut = std::min<Index>(
      num_taps, earliest + static_cast<Index>(std::lround(split_ms * 1e-3 * rir.sample_rate_hz)));

  SpatializedSource out;
  out.direct.sample_rate_hz = dry.sample_rate_hz;
  out.tail.sample_rate_hz = dry.sample_rate_hz;
  out.direct.samples = RealArr2::Zero(num_m, n);
  out.tail.samples = RealArr2::Zero(num_m, n);

  for (Index m = 0; m < num_m; ++m) {
    const RealArr row = rir.channels.row(m).transpose();
    RealArr head = RealArr::Zero(num_taps);
    head.head(cut) = row.head(cut);
    const RealArr full = fft_convolve(dry.samples, row).head(n);
    const RealArr direct = fft_convolve(dry.samples, head).head(n);
    out.direct.samples.row(m) = direct.transpose();
    out.tail.samples.row(m) = (full - direct).transpose();
  }
  return out;
}

MixturePair mix_at_snr(const SpatializedSource& speech,
                       const MultichannelWaveform& noise_rev, Real snr_db) {
  const Index num_m = speech.direct.samples.rows();
  const Index n = speech.direct.samples.cols();
  if (speech.tail.samples.rows() != num_m || speech.tail.samples.cols() != n)
    throw InvalidInputError("mix_at_snr: direct/tail shape mismatch");
  if (noise_rev.samples.rows() != num_m || noise_rev.samples.cols() != n)
    throw InvalidInputError("mix_at_snr: noise shape must match the speech image");
  if (noise_rev.sample_rate_hz != speech.direct.sample_rate_hz)
    throw InvalidInputError("mix_at_snr: sample-rate mismatch");
  if (!std::isfinite(snr_db)) throw InvalidInputError("mix_at_snr: SNR must be finite");

  const RealArr speech_ref =
      (speech.direct.samples.row(0) + speech.tail.samples.row(0)).transpose();
  const Real ps = sum_sq(speech_ref);
  const Real pn = sum_sq(noise_rev.samples.row(0).transpose());
  if (!(ps > 0.0))
    throw InvalidInputError("mix_at_snr: zero-energy speech at the reference channel");
  if (!(pn > 0.0))
    throw InvalidInputError("mix_at_snr: zero-energy noise at the reference channel");

  const Real gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));

  MixturePair pair;
  const int fs = speech.direct.sample_rate_hz;
  pair.direct_speech_image.sample_rate_hz = fs;
  pair.reverberant_speech_tail.sample_rate_hz = fs;
  pair.reverberant_noise.sample_rate_hz = fs;
  pair.mixture.sample_rate_hz = fs;
  pair.anechoic_target.sample_rate_hz = fs;

  pair.direct_speech_image.samples = speech.direct.samples;
  pair.reverberant_speech_tail.samples = speech.tail.samples;
  pair.reverberant_noise.samples = gain * noise_rev.samples;

  RealArr2 mixture = pair.direct_speech_image.samples +
                     pair.reverberant_speech_tail.samples +
                     pair.reverberant_noise.samples;
  const Real peak = mixture.abs().maxCoeff();
  Real norm = 1.0;
  if (peak > kPeakCeiling) norm = kPeakCeiling * (1.0 - 1e-12) / peak;
  if (norm != 1.0) {
    pair.direct_speech_image.samples *= norm;
    pair.reverberant_speech_tail.samples *= norm;
    pair.reverberant_noise.samples *= norm;
  }
  pair.mixture.samples = pair.direct_speech_image.samples +
                          pair.reverberant_speech_tail.samples +
                          pair.reverberant_noise.samples;
  pair.anechoic_target.samples =
      pair.direct_speech_image.samples.row(0).transpose();

  pair.meta.snr_db = snr_db;
  pair.meta.norm_gain = norm;
  pair.meta.sample_rate_hz = fs;
  return pair;
}

namespace {

Waveform tile_to_length(const Waveform& src, Index n) {
  if (src.samples.size() == 0) throw InvalidInputError("noise source is empty");
  Waveform out;
  out.sample_rate_hz = src.sample_rate_hz;
  out.samples = RealArr(n);
  const Index ln = src.samples.size();
  Index off = 0;
  while (off < n) {
    const Index take = std::min(ln, n - off);
    out.samples.segment(off, take) = src.samples.head(take);
    off += take;
  }
  return out;
}

}  // namespace

MixturePair synthesize_pair(const SceneLayout& layout, const Waveform& speech,
                            const Waveform& noise, Real split_ms) {
  if (speech.sample_rate_hz != layout.room.sample_rate_hz ||
      noise.sample_rate_hz != layout.room.sample_rate_hz)
    throw InvalidInputError("synthesize_pair: source sample rates must match the room");
  if (speech.samples.size() == 0)
    throw InvalidInputError("synthesize_pair: empty speech source");

  const Rir rir_speech = simulate_rir(layout.room);
  const Rir rir_noise = simulate_rir(layout.noise_room());

  const Waveform noise_fit = tile_to_length(noise, speech.samples.size());
  const SpatializedSource sp = spatialize(speech, rir_speech, split_ms);
  const SpatializedSource nz = spatialize(noise_fit, rir_noise, split_ms);

  MultichannelWaveform noise_img;
  noise_img.sample_rate_hz = layout.room.sample_rate_hz;
  noise_img.samples = nz.direct.samples + nz.tail.samples;

  MixturePair pair = mix_at_snr(sp, noise_img, layout.snr_db);
  SceneMeta& meta = pair.meta;
  meta.target_doa_deg = layout.speech_doa_deg;
  meta.noise_doa_deg = layout.noise_doa_deg;
  meta.t60_s = layout.room.t60_s;
  meta.room_dims_m = layout.room.dims_m;
  meta.speech_pos_m = layout.room.source_pos_m;
  meta.noise_pos_m = layout.noise_pos_m;
  meta.mic_positions_m = layout.room.array.mic_positions;
  meta.speech_dist_m = layout.speech_dist_m;
  meta.noise_dist_m = layout.noise_dist_m;
  meta.seed = layout.seed;
  meta.split_ms = split_ms;
  meta.interp = layout.room.interp;
  return pair;
}

Real measure_snr_db(const MixturePair& pair) {
  const RealArr speech_ref = (pair.direct_speech_image.samples.row(0) +
                              pair.reverberant_speech_tail.samples.row(0))
                                 .transpose();
  const Real ps = sum_sq(speech_ref);
  const Real pn = sum_sq(pair.reverberant_noise.samples.row(0).transpose());
  if (!(ps > 0.0) || !(pn > 0.0))
    throw InvalidInputError("measure_snr_db: zero-energy component");
  return 10.0 * std::log10(ps / pn);
}

std::string doa_bin_label(Real doa_diff_deg) {
  if (!(doa_diff_deg >= 0.0) || doa_diff_deg > 180.0)
    throw InvalidInputError("doa_bin_label: difference must lie in [0, 180] degrees");
  if (doa_diff_deg < 15.0) return "0-15";
  if (doa_diff_deg < 45.0) return "15-45";
  if (doa_diff_deg < 90.0) return "45-90";
  return "90-180";
}

namespace {

json meta_to_json(const SceneMeta& m) {
  json j;
  j["target_doa_deg"] = m.target_doa_deg;
  j["noise_doa_deg"] = m.noise_doa_deg;
  j["doa_diff_deg"] = m.doa_diff_deg();
  j["doa_bin"] = doa_bin_label(m.doa_diff_deg());
  j["snr_db"] = m.snr_db;
  j["t60_s"] = m.t60_s;
  j["room_dims_m"] = vec3_to_json(m.room_dims_m);
  j["speech_pos_m"] = vec3_to_json(m.speech_pos_m);
  j["noise_pos_m"] = vec3_to_json(m.noise_pos_m);
  j["mic_positions_m"] = json::array();
  for (const Vec3& p : m.mic_positions_m) j["mic_positions_m"].push_back(vec3_to_json(p));
  j["speech_dist_m"] = m.speech_dist_m;
  j["noise_dist_m"] = m.noise_dist_m;
  j["seed"] = m.seed;
  j["norm_gain"] = m.norm_gain;
  j["split_ms"] = m.split_ms;
  j["interp"] = interp_name(m.interp);
  j["sample_rate_hz"] = m.sample_rate_hz;
  return j;
}

SceneMeta meta_from_json(const json& j) {
  SceneMeta m;
  m.target_doa_deg = j.at("target_doa_deg").get<Real>();
  m.noise_doa_deg = j.at("noise_doa_deg").get<Real>();
  m.snr_db = j.at("snr_db").get<Real>();
  m.t60_s = j.at("t60_s").get<Real>();
  m.room_dims_m = vec3_from_json(j.at("room_dims_m"));
  m.speech_pos_m = vec3_from_json(j.at("speech_pos_m"));
  m.noise_pos_m = vec3_from_json(j.at("noise_pos_m"));
  for (const auto& p : j.at("mic_positions_m")) m.mic_positions_m.push_back(vec3_from_json(p));
  m.speech_dist_m = j.at("speech_dist_m").get<Real>();
  m.noise_dist_m = j.at("noise_dist_m").get<Real>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.norm_gain = j.at("norm_gain").get<Real>();
  m.split_ms = j.at("split_ms").get<Real>();
  m.interp = interp_from_name(j.at("interp").get<std::string>());
  m.sample_rate_hz = j.at("sample_rate_hz").get<int>();
  return m;
}

const std::array<const char*, 5> kComponentNames = {
    "mixture", "anechoic_target", "direct_speech_image",
    "reverberant_speech_tail", "reverberant_noise"};

}  // namespace

std::filesystem::path build_manifest(const std::vector<MixturePair>& pairs,
                                     const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + out_dir.string());

  json root;
  root["kind"] = "mcse_dataset";
  root["schema_version"] = 1;
  root["num_scenes"] = pairs.size();
  root["scenes"] = json::array();

  char id_buf[32];
  for (size_t i = 0; i < pairs.size(); ++i) {
    const MixturePair& pair = pairs[i];
    std::snprintf(id_buf, sizeof(id_buf), "scene_%05zu", i);
    const std::string id = id_buf;
    const std::filesystem::path scene_dir = out_dir / id;
    std::filesystem::create_directories(scene_dir, ec);
    if (ec) throw IoError("cannot create scene directory " + scene_dir.string());

    json files;
    const auto rel = [&](const char* name) { return id + "/" + name + ".wav"; };
    write_wav((scene_dir / "mixture.wav").string(), pair.mixture);
    write_wav((scene_dir / "anechoic_target.wav").string(), pair.anechoic_target);
    write_wav((scene_dir / "direct_speech_image.wav").string(), pair.direct_speech_image);
    write_wav((scene_dir / "reverberant_speech_tail.wav").string(),
              pair.reverberant_speech_tail);
    write_wav((scene_dir / "reverberant_noise.wav").string(), pair.reverberant_noise);
    for (const char* name : kComponentNames) files[name] = rel(name);

    json sc;
    sc["id"] = id;
    sc["files"] = files;
    sc["meta"] = meta_to_json(pair.meta);
    root["scenes"].push_back(sc);
  }

  const std::filesystem::path manifest_path = out_dir / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write manifest " + manifest_path.string());
  out << root.dump(2) << "\n";
  if (!out) throw IoError("failed writing manifest " + manifest_path.string());
  return manifest_path;
}

std::vector<MixturePair> load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (root.value("kind", "") != "mcse_dataset")
    throw IoError("not a dataset manifest: " + manifest_path.string());

  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<MixturePair> pairs;
  for (const auto& sc : root.at("scenes")) {
    MixturePair pair;
    const json& files = sc.at("files");
    const auto path_of = [&](const char* name) {
      return (base / files.at(name).get<std::string>()).string();
    };
    pair.mixture = read_wav(path_of("mixture"));
    pair.anechoic_target = read_wav_mono(path_of("anechoic_target"));
    pair.direct_speech_image = read_wav(path_of("direct_speech_image"));
    pair.reverberant_speech_tail = read_wav(path_of("reverberant_speech_tail"));
    pair.reverberant_noise = read_wav(path_of("reverberant_noise"));
    pair.meta = meta_from_json(sc.at("meta"));
    pair.id = sc.at("id").get<std::string>();
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

Waveform synthetic_speech(Real duration_s, int sample_rate_hz, std::uint64_t seed) {
  if (!(duration_s > 0.0) || sample_rate_hz <= 0)
    throw InvalidInputError("synthetic_speech: need positive duration and sample rate");
  Rng rng(seed);
  const Index n = static_cast<Index>(std::lround(duration_s * sample_rate_hz));
  const Real fs = sample_rate_hz;

  const Real f0_base = rng.uniform(110.0, 220.0);
  const Real drift_hz = rng.uniform(0.2, 0.8);
  const Real drift_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Real syllable_hz = rng.uniform(2.5, 4.5);
  const Real syllable_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const int num_harm = 10;
  std::vector<Real> harm_scale(num_harm);
  for (int k = 0; k < num_harm; ++k) harm_scale[k] = rng.uniform(0.7, 1.0) / (k + 1);

  RealArr out(n);
  Real phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (Index i = 0; i < n; ++i) {
    const Real t = i / fs;
    const Real f0 =
        f0_base * (1.0 + 0.08 * std::sin(2.0 * std::numbers::pi * drift_hz * t + drift_phase));
    phase += 2.0 * std::numbers::pi * f0 / fs;
    Real harm = 0.0;
    for (int k = 0; k < num_harm; ++k) {
      if ((k + 1) * f0 > 0.45 * fs) break;
      harm += harm_scale[k] * std::sin((k + 1) * phase);
    }
    const Real gate = std::pow(
        std::max(0.0, std::sin(2.0 * std::numbers::pi * syllable_hz * t + syllable_phase)), 0.7);
    out[i] = gate * harm + 0.01 * rng.normal();
  }
  const Real peak = out.abs().maxCoeff();
  if (peak > 0.0) out *= 0.5 / peak;

  Waveform w;
  w.samples = std::move(out);
  w.sample_rate_hz = sample_rate_hz;
  return w;
}

Waveform synthetic_noise(Real duration_s, int sample_rate_hz, std::uint64_t seed) {
  if (!(duration_s > 0.0) || sample_rate_hz <= 0)
    throw InvalidInputError("synthetic_noise: need positive duration and sample rate");
  Rng rng(seed);
  const Index n = static_cast<Index>(std::lround(duration_s * sample_rate_hz));
  const Real fs = sample_rate_hz;

  const Real cutoff_hz = rng.uniform(500.0, 4000.0);
  const Real alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz / fs);
  const Real am_hz = rng.uniform(0.1, 1.0);
  const Real am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  RealArr out(n);
  Real state = 0.0;
  for (Index i = 0; i < n; ++i) {
    state += alpha * (rng.normal() - state);
    const Real am =
        0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * am_hz * (i / fs) + am_phase);
    out[i] = am * state;
  }
  const Real peak = out.abs().maxCoeff();
  if (peak > 0.0) out *= 0.5 / peak;

  Waveform w;
  w.samples = std::move(out);
  w.sample_rate_hz = sample_rate_hz;
  return w;
}

}  // namespace mcse
