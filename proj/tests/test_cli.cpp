// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "mcse/metrics.hpp"
#include "mcse/room.hpp"
#include "mcse/scene.hpp"
#include "mcse/serialize.hpp"
#include "mcse/stft.hpp"
#include "mcse/wav.hpp"
#include "testutil.hpp"

using namespace mcse;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

// Runs the toolkit binary with `args`, capturing stdout+stderr.
RunResult run_cli(const std::string& args, const test::TempDir& dir) {
  const std::string log = dir.file("cli_log.txt");
  const std::string cmd =
      std::string(MCSE_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Real max_abs_diff(const Waveform& a, const Waveform& b) {
  REQUIRE(a.num_samples() == b.num_samples());
  return (a.samples - b.samples).abs().maxCoeff();
}

// Anechoic broadside layout whose six direct-path delays all round to the
// same sample, so each channel is an exact scalar multiple of the reference
// and the rank-1 steering model holds to float precision.
RoomSpec broadside_room() {
  RoomSpec room;
  room.dims_m = Vec3(6.0, 5.0, 3.0);
  room.t60_s = 0.0;
  room.source_pos_m = Vec3(3.0, 3.0, 1.5);
  room.array = ArrayGeometry::ula(6, 0.05).translated(Vec3(3.0, 1.0, 1.5));
  return room;
}

SceneMeta broadside_meta(const RoomSpec& room, Real snr_db) {
  SceneMeta meta;
  meta.target_doa_deg = 90.0;
  meta.noise_doa_deg = 40.0;
  meta.snr_db = snr_db;
  meta.t60_s = room.t60_s;
  meta.room_dims_m = room.dims_m;
  meta.speech_pos_m = room.source_pos_m;
  meta.noise_pos_m = Vec3(4.5, 2.3, 1.5);
  meta.mic_positions_m = room.array.mic_positions;
  meta.speech_dist_m = 2.0;
  meta.noise_dist_m = 2.0;
  meta.sample_rate_hz = room.sample_rate_hz;
  return meta;
}

// Scene with an exactly rank-1 speech image; optional spatialized noise.
MixturePair rank1_pair(bool with_noise) {
  const RoomSpec room = broadside_room();
  const Waveform speech = synthetic_speech(1.5, room.sample_rate_hz, 41);
  const SpatializedSource sp = spatialize(speech, simulate_rir(room));

  MixturePair pair;
  pair.direct_speech_image = sp.direct;
  pair.reverberant_speech_tail = sp.tail;  // zero for an anechoic room
  pair.anechoic_target = sp.direct.channel(0);
  pair.mixture = sp.direct;
  pair.reverberant_noise = sp.direct;
  pair.reverberant_noise.samples.setZero();
  if (with_noise) {
    RoomSpec noise_room = room;
    noise_room.source_pos_m = Vec3(4.5, 2.3, 1.5);
    const Waveform noise = synthetic_noise(1.5, room.sample_rate_hz, 42);
    const SpatializedSource np = spatialize(noise, simulate_rir(noise_room));
    pair.reverberant_noise.samples =
        0.3 * (np.direct.samples + np.tail.samples);
    pair.mixture.samples += pair.reverberant_noise.samples;
  }
  pair.meta = broadside_meta(room, with_noise ? measure_snr_db(pair) : 60.0);
  return pair;
}

}  // namespace

TEST_CASE("simulate-rir emits a single impulse per channel for t60 zero") {
  test::TempDir dir("cli_rir0");
  const RunResult res = run_cli(
      "simulate-rir --out " + dir.file("rir") +
          " --t60 0 --room 6 5 3 --source 3 3 1.5 --array-center 3 1 1.5 "
          "--num-mics 2",
      dir);
  CHECK(res.exit_code == 0);
  const Rir rir = read_rir(dir.file("rir") + "/rir");
  REQUIRE(rir.num_channels() == 2);
  for (Index m = 0; m < 2; ++m) {
    int nonzero = 0;
    for (Index i = 0; i < rir.num_taps(); ++i)
      if (rir.channels(m, i) != 0.0f) ++nonzero;
    CHECK(nonzero == 1);
  }
}

TEST_CASE("simulate-rir random layouts reproduce byte-identical files") {
  test::TempDir dir("cli_rir_rep");
  const std::string flags = " --random-layout --seed 3";
  CHECK(run_cli("simulate-rir --out " + dir.file("a") + flags, dir).exit_code ==
        0);
  CHECK(run_cli("simulate-rir --out " + dir.file("b") + flags, dir).exit_code ==
        0);
  CHECK(slurp(dir.file("a") + "/rir.wav") == slurp(dir.file("b") + "/rir.wav"));
  CHECK(slurp(dir.file("a") + "/rir.json") ==
        slurp(dir.file("b") + "/rir.json"));
}

TEST_CASE("invalid geometry exits nonzero and names the offending field") {
  test::TempDir dir("cli_badgeom");
  const RunResult res = run_cli(
      "simulate-rir --out " + dir.file("x") + " --room 4 4 2.5 --source 9 9 9",
      dir);
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("source_pos_m") != std::string::npos);
}

TEST_CASE("synth-dataset is deterministic and respects requested ranges") {
  test::TempDir dir("cli_synth");
  const std::string flags =
      " --num-scenes 3 --seed 11 --duration 1.0 --t60-max 0.3 "
      "--snr-min -2 --snr-max 2 --jobs 2";
  CHECK(run_cli("synth-dataset --out " + dir.file("a") + flags, dir)
            .exit_code == 0);
  CHECK(run_cli("synth-dataset --out " + dir.file("b") + flags, dir)
            .exit_code == 0);

  CHECK(slurp(dir.file("a") + "/manifest.json") ==
        slurp(dir.file("b") + "/manifest.json"));
  const auto pairs = load_manifest(dir.file("a") + "/manifest.json");
  REQUIRE(pairs.size() == 3);
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(slurp(dir.file("a") + "/" + pairs[i].id + "/mixture.wav") ==
          slurp(dir.file("b") + "/" + pairs[i].id + "/mixture.wav"));
    CHECK(pairs[i].meta.snr_db >= -2.0);
    CHECK(pairs[i].meta.snr_db <= 2.0);
    CHECK(pairs[i].meta.t60_s <= 0.3);
    CHECK_NOTHROW(doa_bin_label(pairs[i].meta.doa_diff_deg()));
  }
}

TEST_CASE("config file values load and command-line flags override them") {
  test::TempDir dir("cli_config");
  {
    std::ofstream cfg(dir.file("cfg.json"));
    cfg << "{\"num-scenes\": 2, \"duration\": 1.0, \"t60-max\": 0.3, "
           "\"seed\": 5}";
  }

  SUBCASE("file beats defaults") {
    CHECK(run_cli("synth-dataset --config " + dir.file("cfg.json") + " --out " +
                      dir.file("from_file"),
                  dir)
              .exit_code == 0);
    CHECK(load_manifest(dir.file("from_file") + "/manifest.json").size() == 2);
    const auto resolved = nlohmann::json::parse(
        slurp(dir.file("from_file") + "/resolved_config.json"));
    CHECK(resolved.at("num-scenes") == 2);
    CHECK(resolved.at("seed") == 5);
    CHECK(resolved.at("subcommand") == "synth-dataset");
  }

  SUBCASE("explicit flags beat the file") {
    CHECK(run_cli("synth-dataset --config " + dir.file("cfg.json") +
                      " --num-scenes 1 --out " + dir.file("from_cli"),
                  dir)
              .exit_code == 0);
    CHECK(load_manifest(dir.file("from_cli") + "/manifest.json").size() == 1);
  }

  SUBCASE("unknown keys are usage errors") {
    std::ofstream(dir.file("bad.json")) << "{\"bogus-key\": 1}";
    const RunResult res = run_cli(
        "synth-dataset --config " + dir.file("bad.json"), dir);
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("bogus-key") != std::string::npos);
  }
}

TEST_CASE("beamform passes a noise-free rank-1 scene through unchanged") {
  test::TempDir dir("cli_exact");
  build_manifest({rank1_pair(false)}, dir.file("ds"));
  const RunResult res = run_cli(
      "beamform --manifest " + dir.file("ds") + "/manifest.json --out " +
          dir.file("enh") + " --mode ti-mvdr",
      dir);
  REQUIRE(res.exit_code == 0);
  const Waveform est = read_wav_mono(dir.file("enh") + "/scene_00000.wav");
  const Waveform target =
      read_wav_mono(dir.file("ds") + "/scene_00000/anechoic_target.wav");
  CHECK(max_abs_diff(est, target) < 1e-6);
}

TEST_CASE("taylor with oracle corrections recovers the rank-1 target") {
  test::TempDir dir("cli_taylor");
  build_manifest({rank1_pair(true)}, dir.file("ds"));
  const std::string manifest = dir.file("ds") + "/manifest.json";

  SUBCASE("q = 1 cancels the interference to the si-sdr cap") {
    const RunResult res = run_cli(
        "beamform --manifest " + manifest + " --out " + dir.file("q1") +
            " --mode taylor --taylor-q 1 --dump-terms " + dir.file("terms"),
        dir);
    REQUIRE(res.exit_code == 0);
    const Waveform est = read_wav_mono(dir.file("q1") + "/scene_00000.wav");
    const Waveform target =
        read_wav_mono(dir.file("ds") + "/scene_00000/anechoic_target.wav");
    CHECK(max_abs_diff(est, target) < 1e-6);
    CHECK(si_sdr(est, target) >= 100.0);

    const SpectrogramFile term =
        read_spectrogram(dir.file("terms") + "/scene_00000_t1.mcses");
    CHECK(term.spec.num_bins() == 161);
    CHECK(term.spec.num_frames() > 0);
    CHECK(term.meta.at("order") == "1");
  }

  SUBCASE("q = 0 reduces to the plain beamformer byte for byte") {
    CHECK(run_cli("beamform --manifest " + manifest + " --out " +
                      dir.file("plain") + " --mode ti-mvdr",
                  dir)
              .exit_code == 0);
    CHECK(run_cli("beamform --manifest " + manifest + " --out " +
                      dir.file("q0") + " --mode taylor --taylor-q 0",
                  dir)
              .exit_code == 0);
    CHECK(slurp(dir.file("plain") + "/scene_00000.wav") ==
          slurp(dir.file("q0") + "/scene_00000.wav"));
  }
}

TEST_CASE("beamform, evaluate, and weight dumps cooperate") {
  test::TempDir dir("cli_pipeline");
  CHECK(run_cli("synth-dataset --out " + dir.file("ds") +
                    " --num-scenes 2 --seed 4 --duration 1.0 --t60-max 0.3",
                dir)
            .exit_code == 0);
  const std::string manifest = dir.file("ds") + "/manifest.json";
  CHECK(run_cli("beamform --manifest " + manifest + " --out " +
                    dir.file("enh") + " --mode ti-mwf --rtf eigen "
                    "--dump-weights " + dir.file("w") + " --jobs 2",
                dir)
            .exit_code == 0);

  const WeightsFile wf = read_weights(dir.file("w") + "/scene_00000.mcsew");
  CHECK(wf.weights.num_mics() == 6);
  CHECK(wf.weights.num_bins() == 161);
  CHECK(wf.meta.at("mode") == "ti-mwf");

  const RunResult eval = run_cli(
      "evaluate --manifest " + manifest + " --outputs " + dir.file("enh") +
          " --out " + dir.file("rep"),
      dir);
  CHECK(eval.exit_code == 0);
  const auto report =
      nlohmann::json::parse(slurp(dir.file("rep") + "/report.json"));
  CHECK(report.at("kind") == "mcse_eval");
  CHECK(report.at("total") == 2);
  CHECK(slurp(dir.file("rep") + "/report.csv").rfind("# mcse_eval_v1", 0) ==
        0);

  SUBCASE("evaluate on missing outputs is a runtime error") {
    const RunResult res = run_cli(
        "evaluate --manifest " + manifest + " --outputs " + dir.file("empty") +
            " --out " + dir.file("rep2"),
        dir);
    CHECK(res.exit_code == 2);
  }
}

TEST_CASE("beampattern designs place the lobe and the null as requested") {
  test::TempDir dir("cli_bp");
  const RunResult res = run_cli(
      "beampattern --out " + dir.file("bp") +
          " --target-deg 125 --interferer-deg 55",
      dir);
  REQUIRE(res.exit_code == 0);

  std::ifstream in(dir.file("bp") + "/beampattern.csv");
  std::string line;
  REQUIRE(std::getline(in, line));
  REQUIRE(line == "theta_deg,freq_hz,db");
  std::map<double, std::vector<std::pair<double, double>>> by_freq;
  size_t rows = 0;
  while (std::getline(in, line)) {
    double theta = 0.0, freq = 0.0, db = 0.0;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &theta, &freq, &db) == 3);
    by_freq[freq].push_back({theta, db});
    ++rows;
  }
  CHECK(rows == 181 * 5);

  for (const double freq : {2000.0, 2500.0}) {
    const auto& col = by_freq.at(freq);
    REQUIRE(col.size() == 181);
    double best_theta = 0.0, best_db = -1e9;
    double worst_theta = 0.0, worst_db = 1e9;
    for (const auto& [theta, db] : col) {
      if (db > best_db) best_db = db, best_theta = theta;
      if (db < worst_db) worst_db = db, worst_theta = theta;
    }
    CHECK(std::abs(best_theta - 125.0) <= 10.0);
    CHECK(std::abs(worst_theta - 55.0) <= 10.0);
  }

  SUBCASE("reference-selector weights give a flat pattern") {
    BeamformerWeights w;
    w.w.push_back(ComplexMat::Zero(161, 6));
    w.w[0].col(0).setConstant(Complex(1.0, 0.0));
    write_weights(dir.file("eref.mcsew"), w);
    CHECK(run_cli("beampattern --out " + dir.file("bp_eref") + " --weights " +
                      dir.file("eref.mcsew"),
                  dir)
              .exit_code == 0);
    std::ifstream flat_in(dir.file("bp_eref") + "/beampattern.csv");
    std::string flat_line;
    REQUIRE(std::getline(flat_in, flat_line));
    while (std::getline(flat_in, flat_line)) {
      double theta = 0.0, freq = 0.0, db = 1e9;
      REQUIRE(std::sscanf(flat_line.c_str(), "%lf,%lf,%lf", &theta, &freq,
                          &db) == 3);
      CHECK(std::abs(db) < 1e-6);
    }
  }
}

TEST_CASE("usage and runtime failures map to the exit-code contract") {
  test::TempDir dir("cli_exits");
  CHECK(run_cli("unknown-subcommand", dir).exit_code == 1);
  CHECK(run_cli("beamform --no-such-flag", dir).exit_code == 1);
  CHECK(run_cli("beamform --manifest " + dir.file("absent.json") + " --out " +
                    dir.file("x"),
                dir)
            .exit_code == 2);
  CHECK(run_cli("beamform --manifest " + dir.file("absent.json") +
                    " --mode bogus",
                dir)
            .exit_code == 1);
}
