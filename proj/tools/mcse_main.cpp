// SPDX-License-Identifier: Apache-2.0
// mcse: multichannel speech enhancement toolkit driver.
//
// Subcommands: simulate-rir, synth-dataset, beamform, evaluate, beampattern.
// Every flag can also come from a JSON config file (--config, flat keys named
// after the long flags); precedence is command line > config file > built-in
// defaults. Each run writes resolved_config.json beside its outputs, and
// every subcommand is deterministic given its resolved config.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcse/beamform.hpp"
#include "mcse/errors.hpp"
#include "mcse/metrics.hpp"
#include "mcse/rng.hpp"
#include "mcse/room.hpp"
#include "mcse/scene.hpp"
#include "mcse/serialize.hpp"
#include "mcse/stft.hpp"
#include "mcse/taylor.hpp"
#include "mcse/wav.hpp"

namespace {

using nlohmann::json;
using namespace mcse;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config plumbing. Each parameter registers once and is then reachable three
// ways: as a CLI flag, as a config-file key (the flag name without dashes),
// and in the resolved-config echo.

class ConfigBinder {
 public:
  template <typename T>
  void bind(const std::string& key, T* field) {
    entries_[key] = Entry{
        [field](const json& v) { *field = v.get<T>(); },
        [field]() { return json(*field); }};
  }

  void apply(const json& j, const std::string& subcommand) const {
    for (const auto& [key, value] : j.items()) {
      const auto it = entries_.find(key);
      if (it == entries_.end())
        throw InvalidInputError("config: unknown key '" + key +
                                "' for subcommand '" + subcommand + "'");
      try {
        it->second.set(value);
      } catch (const json::exception& e) {
        throw InvalidInputError("config: bad value for '" + key +
                                "': " + e.what());
      }
    }
  }

  json resolved() const {
    json out;
    for (const auto& [key, entry] : entries_) out[key] = entry.get();
    return out;
  }

 private:
  struct Entry {
    std::function<void(const json&)> set;
    std::function<json()> get;
  };
  std::map<std::string, Entry> entries_;
};

// Registers a flag with both CLI11 and the binder.
template <typename T>
CLI::Option* add_opt(CLI::App* cmd, ConfigBinder* binder,
                     const std::string& flag, T* field,
                     const std::string& desc) {
  binder->bind(flag.substr(2), field);
  return cmd->add_option(flag, *field, desc);
}

CLI::Option* add_flag(CLI::App* cmd, ConfigBinder* binder,
                      const std::string& flag, bool* field,
                      const std::string& desc) {
  binder->bind(flag.substr(2), field);
  return cmd->add_flag(flag, *field, desc);
}

// Finds --config in argv ahead of the CLI11 parse so file values can be
// loaded first and then overridden by explicit flags.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return "";
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("config: cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInputError("config: " + path + " is not valid JSON: " +
                            e.what());
  }
}

void write_resolved_config(const fs::path& out_dir, const std::string& name,
                           const ConfigBinder& binder) {
  fs::create_directories(out_dir);
  json root = binder.resolved();
  root["subcommand"] = name;
  std::ofstream out(out_dir / "resolved_config.json");
  if (!out)
    throw IoError("cannot write " + (out_dir / "resolved_config.json").string());
  out << root.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Shared helpers.

Real deg2rad(Real deg) { return deg * std::numbers::pi / 180.0; }

DelayInterp interp_from_name(const std::string& name) {
  if (name == "nearest") return DelayInterp::kNearest;
  if (name == "sinc") return DelayInterp::kSinc;
  throw InvalidInputError("interp must be 'nearest' or 'sinc', got '" + name +
                          "'");
}

Vec3 vec3_from(const std::vector<Real>& v, const std::string& flag) {
  if (v.size() != 3)
    throw InvalidInputError(flag + " needs exactly 3 values");
  return Vec3(v[0], v[1], v[2]);
}

// Runs fn(0..n-1) on up to `jobs` worker threads. The first exception wins
// and is rethrown on the calling thread after the pool drains.
void parallel_for(int jobs, int n, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(jobs));
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

RoomSpec room_from_meta(const SceneMeta& meta) {
  RoomSpec room;
  room.dims_m = meta.room_dims_m;
  room.t60_s = meta.t60_s;
  room.source_pos_m = meta.speech_pos_m;
  room.array.mic_positions = meta.mic_positions_m;
  room.sample_rate_hz = meta.sample_rate_hz;
  room.interp = meta.interp;
  return room;
}

// Bins with no interference energy would make the noise covariance singular;
// an identity there is harmless because the distortionless constraint pins
// the response.
void floor_empty_bins(SpatialCovariance* cov) {
  for (ComplexMat& phi : cov->per_freq)
    if (phi.real().trace() <= 0.0)
      phi = ComplexMat::Identity(phi.rows(), phi.cols());
}

// ---------------------------------------------------------------------------
// simulate-rir

struct RirParams {
  std::string out_dir = "rir_out";
  std::string name = "rir";
  std::vector<Real> room = {6.0, 5.0, 3.0};
  Real t60 = 0.5;
  std::vector<Real> source = {2.0, 3.0, 1.5};
  std::vector<Real> array_center = {3.0, 2.0, 1.5};
  int num_mics = 6;
  Real spacing = 0.05;
  int fs = 16000;
  std::string interp = "nearest";
  int max_order = -1;
  bool random_layout = false;
  std::uint64_t seed = 0;
};

void setup_simulate_rir(CLI::App* cmd, ConfigBinder* binder, RirParams* p) {
  add_opt(cmd, binder, "--out", &p->out_dir, "output directory");
  add_opt(cmd, binder, "--name", &p->name, "basename for the .wav/.json pair");
  add_opt(cmd, binder, "--room", &p->room, "room dimensions LxWxH [m]")
      ->expected(3);
  add_opt(cmd, binder, "--t60", &p->t60,
          "reverberation time [s]; 0 disables reflections");
  add_opt(cmd, binder, "--source", &p->source, "source position [m]")
      ->expected(3);
  add_opt(cmd, binder, "--array-center", &p->array_center,
          "array center position [m]")
      ->expected(3);
  add_opt(cmd, binder, "--num-mics", &p->num_mics, "microphone count");
  add_opt(cmd, binder, "--spacing", &p->spacing, "microphone spacing [m]");
  add_opt(cmd, binder, "--fs", &p->fs, "sample rate [Hz]");
  add_opt(cmd, binder, "--interp", &p->interp,
          "tap placement: nearest or sinc");
  add_opt(cmd, binder, "--max-order", &p->max_order,
          "image order cap; negative selects automatically");
  add_flag(cmd, binder, "--random-layout", &p->random_layout,
           "draw room and placements from the standard scene ranges");
  add_opt(cmd, binder, "--seed", &p->seed, "seed for --random-layout");
}

int run_simulate_rir(const RirParams& p, const ConfigBinder& binder) {
  RoomSpec room;
  if (p.random_layout) {
    SceneSpec spec;
    spec.sample_rate_hz = p.fs;
    spec.interp = interp_from_name(p.interp);
    spec.seed = p.seed;
    room = draw_scene(spec).room;
  } else {
    room.dims_m = vec3_from(p.room, "--room");
    room.t60_s = p.t60;
    room.source_pos_m = vec3_from(p.source, "--source");
    room.array = ArrayGeometry::ula(p.num_mics, p.spacing)
                     .translated(vec3_from(p.array_center, "--array-center"));
    room.sample_rate_hz = p.fs;
    room.interp = interp_from_name(p.interp);
    room.max_order = p.max_order;
  }
  room.validate();

  const Rir rir = simulate_rir(room);
  fs::create_directories(p.out_dir);
  const std::string base = (fs::path(p.out_dir) / p.name).string();
  write_rir(base, rir, room);
  write_resolved_config(p.out_dir, "simulate-rir", binder);

  std::printf("wrote %s.wav (%lld channels, %lld taps)\n", base.c_str(),
              static_cast<long long>(rir.num_channels()),
              static_cast<long long>(rir.num_taps()));
  if (room.t60_s > 0.0)
    std::printf("schroeder t60 %.3f s (target %.3f s)\n", estimate_t60(rir),
                room.t60_s);
  return 0;
}

// ---------------------------------------------------------------------------
// synth-dataset

struct SynthParams {
  std::string out_dir = "dataset";
  int num_scenes = 10;
  std::uint64_t seed = 0;
  Real duration_s = 3.0;
  Real split_ms = 2.5;
  std::string interp = "nearest";
  int fs = 16000;
  int jobs = 1;
  std::vector<Real> room_min = {5.0, 5.0, 3.0};
  std::vector<Real> room_max = {10.0, 10.0, 4.0};
  Real t60_min = 0.1;
  Real t60_max = 0.7;
  Real dist_min = 0.5;
  Real dist_max = 5.0;
  Real dist_step = 0.5;
  Real min_doa_sep = 5.0;
  Real snr_min = -6.0;
  Real snr_max = 6.0;
  int num_mics = 6;
  Real spacing = 0.05;
};

void setup_synth_dataset(CLI::App* cmd, ConfigBinder* binder, SynthParams* p) {
  add_opt(cmd, binder, "--out", &p->out_dir, "dataset directory");
  add_opt(cmd, binder, "--num-scenes", &p->num_scenes, "scenes to synthesize");
  add_opt(cmd, binder, "--seed", &p->seed, "global seed");
  add_opt(cmd, binder, "--duration", &p->duration_s,
          "source duration per scene [s]");
  add_opt(cmd, binder, "--split-ms", &p->split_ms,
          "direct/tail split after the first arrival [ms]");
  add_opt(cmd, binder, "--interp", &p->interp,
          "tap placement: nearest or sinc");
  add_opt(cmd, binder, "--fs", &p->fs, "sample rate [Hz]");
  add_opt(cmd, binder, "--jobs", &p->jobs, "worker threads");
  add_opt(cmd, binder, "--room-min", &p->room_min, "smallest room LxWxH [m]")
      ->expected(3);
  add_opt(cmd, binder, "--room-max", &p->room_max, "largest room LxWxH [m]")
      ->expected(3);
  add_opt(cmd, binder, "--t60-min", &p->t60_min, "lowest T60 [s]");
  add_opt(cmd, binder, "--t60-max", &p->t60_max, "highest T60 [s]");
  add_opt(cmd, binder, "--dist-min", &p->dist_min, "closest source [m]");
  add_opt(cmd, binder, "--dist-max", &p->dist_max, "farthest source [m]");
  add_opt(cmd, binder, "--dist-step", &p->dist_step, "distance grid step [m]");
  add_opt(cmd, binder, "--min-doa-sep", &p->min_doa_sep,
          "minimum speech/noise DOA separation [deg]");
  add_opt(cmd, binder, "--snr-min", &p->snr_min, "lowest mixing SNR [dB]");
  add_opt(cmd, binder, "--snr-max", &p->snr_max, "highest mixing SNR [dB]");
  add_opt(cmd, binder, "--num-mics", &p->num_mics, "microphone count");
  add_opt(cmd, binder, "--spacing", &p->spacing, "microphone spacing [m]");
}

SceneRanges ranges_from_params(const SynthParams& p) {
  SceneRanges r;
  r.room_min_m = vec3_from(p.room_min, "--room-min");
  r.room_max_m = vec3_from(p.room_max, "--room-max");
  r.t60_min_s = p.t60_min;
  r.t60_max_s = p.t60_max;
  r.dist_min_m = p.dist_min;
  r.dist_max_m = p.dist_max;
  r.dist_step_m = p.dist_step;
  r.min_doa_separation_deg = p.min_doa_sep;
  r.snr_min_db = p.snr_min;
  r.snr_max_db = p.snr_max;
  r.num_mics = p.num_mics;
  r.mic_spacing_m = p.spacing;
  return r;
}

int run_synth_dataset(const SynthParams& p, const ConfigBinder& binder) {
  if (p.num_scenes <= 0)
    throw InvalidInputError("--num-scenes must be positive");
  const SceneRanges ranges = ranges_from_params(p);
  ranges.validate();
  const DelayInterp interp = interp_from_name(p.interp);

  std::vector<MixturePair> pairs(static_cast<size_t>(p.num_scenes));
  parallel_for(p.jobs, p.num_scenes, [&](int i) {
    const std::uint64_t base = static_cast<std::uint64_t>(i) * 3;
    const Waveform speech = synthetic_speech(
        p.duration_s, p.fs, Rng::derive_stream(p.seed, base));
    const Waveform noise = synthetic_noise(
        p.duration_s, p.fs, Rng::derive_stream(p.seed, base + 1));
    SceneSpec spec;
    spec.ranges = ranges;
    spec.sample_rate_hz = p.fs;
    spec.interp = interp;
    spec.seed = Rng::derive_stream(p.seed, base + 2);
    const SceneLayout layout = draw_scene(spec);
    pairs[static_cast<size_t>(i)] =
        synthesize_pair(layout, speech, noise, p.split_ms);
  });

  const fs::path manifest = build_manifest(pairs, p.out_dir);
  write_resolved_config(p.out_dir, "synth-dataset", binder);
  std::printf("wrote %d scenes and %s\n", p.num_scenes,
              manifest.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// beamform

struct BeamformParams {
  std::string manifest = "dataset/manifest.json";
  std::string out_dir = "enhanced";
  std::string mode = "ti-mvdr";
  std::string rtf = "direct-path";
  Real loading = 1e-6;
  Real lambda = 0.95;
  int taylor_q = 3;
  std::string operator_tag = "analytic-linear";
  std::string recursion = "contracted";
  bool no_factorial = false;
  std::string dump_weights = "";
  std::string dump_terms = "";
  int jobs = 1;
  int window_len = 320;
  int hop_len = 160;
  int fft_len = 320;
};

void setup_beamform(CLI::App* cmd, ConfigBinder* binder, BeamformParams* p) {
  add_opt(cmd, binder, "--manifest", &p->manifest, "dataset manifest path");
  add_opt(cmd, binder, "--out", &p->out_dir, "enhanced output directory");
  add_opt(cmd, binder, "--mode", &p->mode,
          "ti-mvdr | ti-mwf | frame-mvdr | taylor");
  add_opt(cmd, binder, "--rtf", &p->rtf,
          "steering source: direct-path (geometry) or eigen (covariance)");
  add_opt(cmd, binder, "--loading", &p->loading,
          "diagonal loading, scaled by trace/M");
  add_opt(cmd, binder, "--lambda", &p->lambda,
          "recursive smoothing for frame-mvdr");
  add_opt(cmd, binder, "--taylor-q", &p->taylor_q,
          "number of high-order terms for mode=taylor");
  add_opt(cmd, binder, "--operator", &p->operator_tag,
          "derivative operator: analytic-linear | zero");
  add_opt(cmd, binder, "--recursion", &p->recursion,
          "update form: contracted | literal");
  add_flag(cmd, binder, "--no-factorial", &p->no_factorial,
           "skip 1/q! scaling when superimposing");
  add_opt(cmd, binder, "--dump-weights", &p->dump_weights,
          "directory for per-scene weight containers");
  add_opt(cmd, binder, "--dump-terms", &p->dump_terms,
          "directory for per-scene term spectra (mode=taylor)");
  add_opt(cmd, binder, "--jobs", &p->jobs, "worker threads");
  add_opt(cmd, binder, "--window-len", &p->window_len, "analysis window");
  add_opt(cmd, binder, "--hop-len", &p->hop_len, "analysis hop");
  add_opt(cmd, binder, "--fft-len", &p->fft_len, "transform length");
}

std::map<std::string, std::string> run_meta(const BeamformParams& p,
                                            const std::string& id) {
  return {{"scene", id},
          {"mode", p.mode},
          {"rtf", p.rtf},
          {"loading", std::to_string(p.loading)},
          {"lambda", std::to_string(p.lambda)}};
}

void process_scene(const MixturePair& pair, const BeamformParams& p,
                   const StftConfig& cfg) {
  const MultichannelSpectrogram mix = stft(pair.mixture, cfg);

  MultichannelWaveform interference = pair.reverberant_speech_tail;
  interference.samples += pair.reverberant_noise.samples;
  SpatialCovariance phi_n = estimate_covariance(stft(interference, cfg));
  floor_empty_bins(&phi_n);

  Rtf rtf;
  if (p.rtf == "direct-path") {
    rtf = direct_path_rtf(direct_path_rir(room_from_meta(pair.meta)), cfg);
  } else if (p.rtf == "eigen") {
    rtf = estimate_rtf(estimate_covariance(stft(pair.direct_speech_image, cfg)));
  } else {
    throw InvalidInputError("--rtf must be 'direct-path' or 'eigen', got '" +
                            p.rtf + "'");
  }

  BeamformerWeights weights;
  Spectrogram enhanced;
  if (p.mode == "ti-mvdr") {
    weights = mvdr_weights(phi_n, rtf, p.loading);
    enhanced = apply_beamformer(weights, mix);
  } else if (p.mode == "ti-mwf") {
    const SpatialCovariance phi_s =
        estimate_covariance(stft(pair.direct_speech_image, cfg));
    weights = mwf_weights(phi_s, phi_n, p.loading);
    enhanced = apply_beamformer(weights, mix);
  } else if (p.mode == "frame-mvdr") {
    weights = frame_mvdr(stft(pair.direct_speech_image, cfg),
                         stft(interference, cfg), p.lambda, p.loading);
    enhanced = apply_beamformer(weights, mix);
  } else if (p.mode == "taylor") {
    weights = mvdr_weights(phi_n, rtf, p.loading);
    TaylorConfig tc;
    tc.num_orders = p.taylor_q;
    tc.operator_tag = p.operator_tag;
    tc.factorial_scaling = !p.no_factorial;
    tc.validate();
    const RecursionForm form = p.recursion == "literal"
                                   ? RecursionForm::kLiteral
                                   : RecursionForm::kContracted;
    if (p.recursion != "literal" && p.recursion != "contracted")
      throw InvalidInputError("--recursion must be 'contracted' or 'literal'");
    const CorrectionTerm delta =
        oracle_correction(mix, stft(pair.direct_speech_image, cfg));
    OperatorContext ctx;
    ctx.mixture = &mix;
    ctx.weights = &weights;
    ctx.correction = &delta;
    const auto op = make_operator(p.operator_tag, form);
    const TaylorResult result = run_taylor_pipeline(mix, weights, *op, ctx, tc);
    enhanced = result.final;
    if (!p.dump_terms.empty()) {
      fs::create_directories(p.dump_terms);
      for (const TaylorTerm& term : result.terms) {
        auto meta = run_meta(p, pair.id);
        meta["order"] = std::to_string(term.order);
        write_spectrogram((fs::path(p.dump_terms) /
                           (pair.id + "_t" + std::to_string(term.order) +
                            ".mcses"))
                              .string(),
                          Spectrogram{term.value, cfg, pair.mixture.sample_rate_hz},
                          meta);
      }
    }
  } else {
    throw InvalidInputError(
        "--mode must be one of ti-mvdr, ti-mwf, frame-mvdr, taylor; got '" +
        p.mode + "'");
  }

  const Waveform est = istft(enhanced, cfg, pair.mixture.num_samples());
  write_wav((fs::path(p.out_dir) / (pair.id + ".wav")).string(), est);
  if (!p.dump_weights.empty()) {
    fs::create_directories(p.dump_weights);
    write_weights(
        (fs::path(p.dump_weights) / (pair.id + ".mcsew")).string(), weights,
        run_meta(p, pair.id));
  }
}

int run_beamform(const BeamformParams& p, const ConfigBinder& binder) {
  if (p.mode != "ti-mvdr" && p.mode != "ti-mwf" && p.mode != "frame-mvdr" &&
      p.mode != "taylor")
    throw InvalidInputError(
        "--mode must be one of ti-mvdr, ti-mwf, frame-mvdr, taylor; got '" +
        p.mode + "'");
  if (p.rtf != "direct-path" && p.rtf != "eigen")
    throw InvalidInputError("--rtf must be 'direct-path' or 'eigen', got '" +
                            p.rtf + "'");
  if (p.recursion != "contracted" && p.recursion != "literal")
    throw InvalidInputError("--recursion must be 'contracted' or 'literal'");
  if (p.mode == "taylor") {
    TaylorConfig tc;
    tc.num_orders = p.taylor_q;
    tc.operator_tag = p.operator_tag;
    tc.validate();
    make_operator(p.operator_tag);
  }
  StftConfig cfg;
  cfg.window_len = p.window_len;
  cfg.hop_len = p.hop_len;
  cfg.fft_len = p.fft_len;
  cfg.validate();

  const std::vector<MixturePair> pairs = load_manifest(p.manifest);
  if (pairs.empty()) throw InvalidInputError("manifest lists no scenes");
  fs::create_directories(p.out_dir);
  parallel_for(p.jobs, static_cast<int>(pairs.size()), [&](int i) {
    process_scene(pairs[static_cast<size_t>(i)], p, cfg);
  });
  write_resolved_config(p.out_dir, "beamform", binder);
  std::printf("enhanced %zu scenes into %s\n", pairs.size(),
              p.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalParams {
  std::string manifest = "dataset/manifest.json";
  std::string outputs = "enhanced";
  std::string out_dir = "reports";
};

void setup_evaluate(CLI::App* cmd, ConfigBinder* binder, EvalParams* p) {
  add_opt(cmd, binder, "--manifest", &p->manifest, "dataset manifest path");
  add_opt(cmd, binder, "--outputs", &p->outputs,
          "directory with <scene id>.wav system outputs");
  add_opt(cmd, binder, "--out", &p->out_dir, "report directory");
}

int run_evaluate(const EvalParams& p, const ConfigBinder& binder) {
  const EvalReport report = evaluate_manifest(p.manifest, p.outputs);
  fs::create_directories(p.out_dir);
  write_report_csv(report, fs::path(p.out_dir) / "report.csv");
  write_report_json(report, fs::path(p.out_dir) / "report.json");
  write_resolved_config(p.out_dir, "evaluate", binder);
  std::printf("evaluated %zu utterances\n", report.utterances.size());
  std::printf("mean si-sdr %.2f dB, mean seg-snr %.2f dB\n",
              report.mean_si_sdr_db, report.mean_seg_snr_db);
  return 0;
}

// ---------------------------------------------------------------------------
// beampattern

struct BeampatternParams {
  std::string out_dir = "beampattern";
  std::string weights_file = "";
  int frame = 0;
  Real target_deg = 125.0;
  Real interferer_deg = 55.0;
  Real noise_floor = 0.01;
  Real loading = 1e-6;
  int num_mics = 6;
  Real spacing = 0.05;
  int fs = 16000;
  int fft_len = 320;
  Real angle_min = 0.0;
  Real angle_max = 180.0;
  Real angle_step = 1.0;
  std::vector<Real> freqs = {1000.0, 1500.0, 2000.0, 2500.0, 3000.0};
};

void setup_beampattern(CLI::App* cmd, ConfigBinder* binder,
                       BeampatternParams* p) {
  add_opt(cmd, binder, "--out", &p->out_dir, "output directory");
  add_opt(cmd, binder, "--weights", &p->weights_file,
          "weights container to analyze; omit to design MVDR weights");
  add_opt(cmd, binder, "--frame", &p->frame,
          "frame index into a frame-varying weights file");
  add_opt(cmd, binder, "--target-deg", &p->target_deg,
          "designed look direction [deg]");
  add_opt(cmd, binder, "--interferer-deg", &p->interferer_deg,
          "designed point interferer direction [deg]");
  add_opt(cmd, binder, "--noise-floor", &p->noise_floor,
          "white-noise power behind the designed interferer");
  add_opt(cmd, binder, "--loading", &p->loading, "diagonal loading");
  add_opt(cmd, binder, "--num-mics", &p->num_mics, "microphone count");
  add_opt(cmd, binder, "--spacing", &p->spacing, "microphone spacing [m]");
  add_opt(cmd, binder, "--fs", &p->fs, "sample rate [Hz]");
  add_opt(cmd, binder, "--fft-len", &p->fft_len, "transform length");
  add_opt(cmd, binder, "--angle-min", &p->angle_min, "first angle [deg]");
  add_opt(cmd, binder, "--angle-max", &p->angle_max, "last angle [deg]");
  add_opt(cmd, binder, "--angle-step", &p->angle_step, "angle grid step [deg]");
  add_opt(cmd, binder, "--freqs", &p->freqs, "analysis frequencies [Hz]");
}

int run_beampattern(const BeampatternParams& p, const ConfigBinder& binder) {
  if (p.angle_step <= 0.0)
    throw InvalidInputError("--angle-step must be positive");
  if (p.angle_max < p.angle_min)
    throw InvalidInputError("--angle-max must be >= --angle-min");
  if (p.freqs.empty()) throw InvalidInputError("--freqs must not be empty");

  const ArrayGeometry array = ArrayGeometry::ula(p.num_mics, p.spacing);
  StftConfig cfg;
  cfg.fft_len = p.fft_len;
  cfg.window_len = p.fft_len;
  cfg.hop_len = std::max(1, p.fft_len / 2);
  cfg.validate();

  ComplexMat weights_fm;
  if (!p.weights_file.empty()) {
    const WeightsFile wf = read_weights(p.weights_file);
    if (p.frame < 0 || p.frame >= wf.weights.num_frames())
      throw InvalidInputError("--frame is out of range for " + p.weights_file);
    if (wf.weights.num_mics() != array.num_mics())
      throw InvalidInputError(
          "--num-mics does not match the weights container");
    if (wf.weights.num_bins() != cfg.num_bins())
      throw InvalidInputError("--fft-len does not match the weights container");
    weights_fm = wf.weights.w[static_cast<size_t>(p.frame)];
  } else {
    const Rtf look = steering_rtf(array, deg2rad(p.target_deg), cfg, p.fs);
    const Rtf jam = steering_rtf(array, deg2rad(p.interferer_deg), cfg, p.fs);
    SpatialCovariance phi;
    phi.per_freq.reserve(static_cast<size_t>(cfg.num_bins()));
    for (Index f = 0; f < cfg.num_bins(); ++f) {
      const ComplexVec d = jam.vectors.row(f).transpose();
      ComplexMat m = d * d.adjoint();
      m.diagonal().array() += Complex(p.noise_floor, 0.0);
      phi.per_freq.push_back(m);
    }
    weights_fm = mvdr_weights(phi, look, p.loading).w[0];
  }

  const Index num_angles = static_cast<Index>(
      std::floor((p.angle_max - p.angle_min) / p.angle_step)) + 1;
  RealVec angles(num_angles);
  for (Index a = 0; a < num_angles; ++a)
    angles[a] = deg2rad(p.angle_min + static_cast<Real>(a) * p.angle_step);
  RealVec freqs(static_cast<Index>(p.freqs.size()));
  for (Index k = 0; k < freqs.size(); ++k)
    freqs[k] = p.freqs[static_cast<size_t>(k)];

  const Beampattern bp =
      beampattern(weights_fm, array, angles, freqs, p.fs, p.fft_len);
  fs::create_directories(p.out_dir);
  write_beampattern_csv((fs::path(p.out_dir) / "beampattern.csv").string(),
                        bp);
  write_resolved_config(p.out_dir, "beampattern", binder);
  std::printf("wrote %s (%lld angles x %lld freqs)\n",
              (fs::path(p.out_dir) / "beampattern.csv").string().c_str(),
              static_cast<long long>(num_angles),
              static_cast<long long>(freqs.size()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcse: multichannel speech enhancement toolkit"};
  app.require_subcommand(1);

  RirParams rir_params;
  SynthParams synth_params;
  BeamformParams bf_params;
  EvalParams eval_params;
  BeampatternParams bp_params;

  ConfigBinder rir_binder, synth_binder, bf_binder, eval_binder, bp_binder;
  std::string config_path;

  CLI::App* rir_cmd = app.add_subcommand(
      "simulate-rir", "simulate a room impulse response");
  CLI::App* synth_cmd = app.add_subcommand(
      "synth-dataset", "synthesize a spatialized two-source dataset");
  CLI::App* bf_cmd = app.add_subcommand(
      "beamform", "run an oracle beamformer or the expansion pipeline");
  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "score system outputs against a dataset manifest");
  CLI::App* bp_cmd = app.add_subcommand(
      "beampattern", "export a spatial response as CSV");
  for (CLI::App* cmd :
       {rir_cmd, synth_cmd, bf_cmd, eval_cmd, bp_cmd})
    cmd->add_option("--config", config_path,
                    "JSON config file; flags override its values");

  setup_simulate_rir(rir_cmd, &rir_binder, &rir_params);
  setup_synth_dataset(synth_cmd, &synth_binder, &synth_params);
  setup_beamform(bf_cmd, &bf_binder, &bf_params);
  setup_evaluate(eval_cmd, &eval_binder, &eval_params);
  setup_beampattern(bp_cmd, &bp_binder, &bp_params);

  try {
    const std::string pre_config = find_config_path(argc, argv);
    if (!pre_config.empty() && argc > 1) {
      const json file = load_config_file(pre_config);
      const std::string sub = argv[1];
      if (sub == "simulate-rir") rir_binder.apply(file, sub);
      else if (sub == "synth-dataset") synth_binder.apply(file, sub);
      else if (sub == "beamform") bf_binder.apply(file, sub);
      else if (sub == "evaluate") eval_binder.apply(file, sub);
      else if (sub == "beampattern") bp_binder.apply(file, sub);
    }

    app.parse(argc, argv);

    if (rir_cmd->parsed()) return run_simulate_rir(rir_params, rir_binder);
    if (synth_cmd->parsed()) return run_synth_dataset(synth_params, synth_binder);
    if (bf_cmd->parsed()) return run_beamform(bf_params, bf_binder);
    if (eval_cmd->parsed()) return run_evaluate(eval_params, eval_binder);
    if (bp_cmd->parsed()) return run_beampattern(bp_params, bp_binder);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
