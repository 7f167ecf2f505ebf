// SPDX-License-Identifier: Apache-2.0
#include "mcse/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "mcse/errors.hpp"

namespace mcse {
namespace {

using nlohmann::json;

constexpr char kWeightsKind[] = "beamformer_weights";
constexpr char kSpectrogramKind[] = "spectrogram";
constexpr char kDtype[] = "complex64-interleaved";
constexpr int kSchemaVersion = 1;

void put_u32_le(std::string* buf, uint32_t v) {
  buf->push_back(static_cast<char>(v & 0xff));
  buf->push_back(static_cast<char>((v >> 8) & 0xff));
  buf->push_back(static_cast<char>((v >> 16) & 0xff));
  buf->push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_complex(std::string* buf, Complex z) {
  put_u32_le(buf, std::bit_cast<uint32_t>(static_cast<float>(z.real())));
  put_u32_le(buf, std::bit_cast<uint32_t>(static_cast<float>(z.imag())));
}

uint32_t get_u32_le(const std::string& buf, size_t pos) {
  const auto b = [&](size_t i) {
    return static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i]));
  };
  return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
}

Complex get_complex(const std::string& buf, size_t pos) {
  return Complex(std::bit_cast<float>(get_u32_le(buf, pos)),
                 std::bit_cast<float>(get_u32_le(buf, pos + 4)));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_container(const std::string& path, const json& header,
                     const std::function<void(std::string*)>& payload_fn) {
  const std::string htext = header.dump();
  std::string out;
  put_u32_le(&out, static_cast<uint32_t>(htext.size()));
  out += htext;
  payload_fn(&out);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path);
}

// Validates the framing and common fields; returns the parsed header and the
// byte offset of the payload.
json parse_container(const std::string& blob, const std::string& path,
                     const char* expected_kind, size_t* payload_pos) {
  if (blob.size() < 4) throw IoError(path + ": truncated container");
  const uint32_t hlen = get_u32_le(blob, 0);
  if (blob.size() - 4 < hlen) throw IoError(path + ": truncated JSON header");
  json h;
  try {
    h = json::parse(blob.substr(4, hlen));
  } catch (const json::exception& e) {
    throw IoError(path + ": bad JSON header: " + e.what());
  }
  const std::string kind = h.value("kind", "");
  if (kind != expected_kind)
    throw IoError(path + ": expected kind '" + expected_kind + "', got '" +
                  kind + "'");
  if (h.value("schema_version", 0) != kSchemaVersion)
    throw IoError(path + ": unsupported schema_version");
  if (h.value("dtype", "") != kDtype)
    throw IoError(path + ": unsupported dtype");
  *payload_pos = 4 + hlen;
  return h;
}

std::map<std::string, std::string> meta_from_header(const json& h,
                                                    const std::string& path) {
  std::map<std::string, std::string> meta;
  if (!h.contains("meta")) return meta;
  const json& m = h.at("meta");
  if (!m.is_object()) throw IoError(path + ": meta must be an object");
  for (const auto& [key, value] : m.items()) {
    if (!value.is_string())
      throw IoError(path + ": meta values must be strings");
    meta.emplace(key, value.get<std::string>());
  }
  return meta;
}

void check_payload_size(const std::string& blob, size_t payload_pos,
                        unsigned long long num_elems, const std::string& path) {
  if (blob.size() - payload_pos != num_elems * 8ull)
    throw IoError(path + ": payload size does not match the header shape");
}

const char* window_name(WindowKind w) {
  return w == WindowKind::kHann ? "hann" : "rect";
}

WindowKind window_from_name(const std::string& name, const std::string& path) {
  if (name == "hann") return WindowKind::kHann;
  if (name == "rect") return WindowKind::kRect;
  throw IoError(path + ": unknown window '" + name + "'");
}

}  // namespace

void write_weights(const std::string& path, const BeamformerWeights& weights,
                   const std::map<std::string, std::string>& meta) {
  if (weights.w.empty())
    throw InvalidInputError("write_weights: weights hold no frames");
  const Index num_f = weights.num_bins();
  const Index num_m = weights.num_mics();
  if (num_f == 0 || num_m == 0)
    throw InvalidInputError("write_weights: empty weight matrix");
  for (const ComplexMat& wt : weights.w)
    if (wt.rows() != num_f || wt.cols() != num_m)
      throw InvalidInputError("write_weights: ragged frame shapes");

  json h;
  h["kind"] = kWeightsKind;
  h["schema_version"] = kSchemaVersion;
  h["dtype"] = kDtype;
  h["layout"] = "frame,bin,mic";
  h["shape"] = {weights.num_frames(), num_f, num_m};
  h["time_invariant"] = weights.time_invariant();
  h["meta"] = meta;
  write_container(path, h, [&](std::string* buf) {
    for (const ComplexMat& wt : weights.w)
      for (Index f = 0; f < num_f; ++f)
        for (Index m = 0; m < num_m; ++m) put_complex(buf, wt(f, m));
  });
}

WeightsFile read_weights(const std::string& path) {
  const std::string blob = read_file(path);
  size_t pos = 0;
  const json h = parse_container(blob, path, kWeightsKind, &pos);
  if (h.value("layout", "") != "frame,bin,mic")
    throw IoError(path + ": unsupported weights layout");
  const auto shape = h.at("shape").get<std::vector<long long>>();
  if (shape.size() != 3 || shape[0] <= 0 || shape[1] <= 0 || shape[2] <= 0)
    throw IoError(path + ": bad weights shape");
  const Index num_t = static_cast<Index>(shape[0]);
  const Index num_f = static_cast<Index>(shape[1]);
  const Index num_m = static_cast<Index>(shape[2]);
  check_payload_size(blob, pos,
                     static_cast<unsigned long long>(shape[0]) *
                         static_cast<unsigned long long>(shape[1]) *
                         static_cast<unsigned long long>(shape[2]),
                     path);

  WeightsFile out;
  out.meta = meta_from_header(h, path);
  out.weights.w.assign(static_cast<size_t>(num_t), ComplexMat(num_f, num_m));
  size_t at = pos;
  for (Index t = 0; t < num_t; ++t)
    for (Index f = 0; f < num_f; ++f)
      for (Index m = 0; m < num_m; ++m) {
        out.weights.w[static_cast<size_t>(t)](f, m) = get_complex(blob, at);
        at += 8;
      }
  return out;
}

void write_spectrogram(const std::string& path, const Spectrogram& spec,
                       const std::map<std::string, std::string>& meta) {
  if (spec.num_frames() == 0 || spec.num_bins() == 0)
    throw InvalidInputError("write_spectrogram: empty spectrogram");
  json h;
  h["kind"] = kSpectrogramKind;
  h["schema_version"] = kSchemaVersion;
  h["dtype"] = kDtype;
  h["layout"] = "frame,bin";
  h["shape"] = {spec.num_frames(), spec.num_bins()};
  h["sample_rate_hz"] = spec.sample_rate_hz;
  h["window_len"] = spec.config.window_len;
  h["hop_len"] = spec.config.hop_len;
  h["fft_len"] = spec.config.fft_len;
  h["window"] = window_name(spec.config.window);
  h["meta"] = meta;
  write_container(path, h, [&](std::string* buf) {
    for (Index t = 0; t < spec.num_frames(); ++t)
      for (Index f = 0; f < spec.num_bins(); ++f)
        put_complex(buf, spec.data(t, f));
  });
}

SpectrogramFile read_spectrogram(const std::string& path) {
  const std::string blob = read_file(path);
  size_t pos = 0;
  const json h = parse_container(blob, path, kSpectrogramKind, &pos);
  if (h.value("layout", "") != "frame,bin")
    throw IoError(path + ": unsupported spectrogram layout");
  const auto shape = h.at("shape").get<std::vector<long long>>();
  if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0)
    throw IoError(path + ": bad spectrogram shape");
  const Index num_t = static_cast<Index>(shape[0]);
  const Index num_f = static_cast<Index>(shape[1]);
  check_payload_size(blob, pos,
                     static_cast<unsigned long long>(shape[0]) *
                         static_cast<unsigned long long>(shape[1]),
                     path);

  SpectrogramFile out;
  out.meta = meta_from_header(h, path);
  out.spec.sample_rate_hz = h.value("sample_rate_hz", 16000);
  out.spec.config.window_len = h.value("window_len", 320);
  out.spec.config.hop_len = h.value("hop_len", 160);
  out.spec.config.fft_len = h.value("fft_len", 320);
  out.spec.config.window = window_from_name(h.value("window", "hann"), path);
  out.spec.data.resize(num_t, num_f);
  size_t at = pos;
  for (Index t = 0; t < num_t; ++t)
    for (Index f = 0; f < num_f; ++f) {
      out.spec.data(t, f) = get_complex(blob, at);
      at += 8;
    }
  return out;
}

void write_beampattern_csv(const std::string& path, const Beampattern& bp) {
  if (bp.db.rows() != bp.angles_rad.size() ||
      bp.db.cols() != bp.freqs_hz.size())
    throw InvalidInputError(
        "write_beampattern_csv: matrix shape does not match the grids");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "theta_deg,freq_hz,db\n";
  constexpr Real kDegPerRad = 180.0 / std::numbers::pi;
  char line[96];
  for (Index a = 0; a < bp.angles_rad.size(); ++a)
    for (Index k = 0; k < bp.freqs_hz.size(); ++k) {
      std::snprintf(line, sizeof(line), "%.4f,%.2f,%.4f\n",
                    bp.angles_rad[a] * kDegPerRad, bp.freqs_hz[k], bp.db(a, k));
      f << line;
    }
  if (!f) throw IoError("short write to " + path);
}

}  // namespace mcse
