// SPDX-License-Identifier: Apache-2.0
#include "mcse/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mcse/errors.hpp"
#include "mcse/scene.hpp"
#include "mcse/wav.hpp"

namespace mcse {

namespace {

using nlohmann::json;

constexpr Real kSiSdrCapDb = 100.0;
constexpr Real kSiSdrFloorDb = -100.0;
constexpr Real kSegSnrMinDb = -10.0;
constexpr Real kSegSnrMaxDb = 35.0;
constexpr Real kActiveFrameRatio = 1e-4;

const std::array<const char*, 4> kBinLabels = {"0-15", "15-45", "45-90",
                                               "90-180"};

// Scale-invariant SNR of one segment, clamped to [lo, hi].
Real projected_snr_db(const RealArr& est, const RealArr& ref, Real lo, Real hi) {
  const Real ref_energy = (ref * ref).sum();
  const Real a = (est * ref).sum() / ref_energy;
  const Real num = a * a * ref_energy;
  const Real den = (a * ref - est).square().sum();
  if (!(num > 0.0)) return lo;
  if (!(den > 0.0)) return hi;
  return std::clamp(10.0 * std::log10(num / den), lo, hi);
}

}  // namespace

Real si_sdr(const Waveform& est, const Waveform& ref) {
  if (est.samples.size() != ref.samples.size())
    throw InvalidInputError("si_sdr: length mismatch");
  if (ref.samples.size() == 0) throw InvalidInputError("si_sdr: empty signals");
  if (est.sample_rate_hz != ref.sample_rate_hz)
    throw InvalidInputError("si_sdr: sample-rate mismatch");
  if (!((ref.samples * ref.samples).sum() > 0.0))
    throw InvalidInputError("si_sdr: zero-energy reference");
  return projected_snr_db(est.samples, ref.samples, kSiSdrFloorDb, kSiSdrCapDb);
}

Real segmental_snr(const Waveform& est, const Waveform& ref, Real frame_ms) {
  if (est.samples.size() != ref.samples.size())
    throw InvalidInputError("segmental_snr: length mismatch");
  if (ref.samples.size() == 0)
    throw InvalidInputError("segmental_snr: empty signals");
  if (!(frame_ms > 0.0))
    throw InvalidInputError("segmental_snr: frame_ms must be > 0");

  const Index n = ref.samples.size();
  const Index frame_len = std::max<Index>(
      1, static_cast<Index>(std::lround(frame_ms * 1e-3 * ref.sample_rate_hz)));
  const Index num_frames = std::max<Index>(1, n / frame_len);

  std::vector<Real> energies(static_cast<size_t>(num_frames));
  Real peak = 0.0;
  for (Index k = 0; k < num_frames; ++k) {
    const Index len = std::min(frame_len, n - k * frame_len);
    const RealArr seg = ref.samples.segment(k * frame_len, len);
    energies[static_cast<size_t>(k)] = (seg * seg).sum();
    peak = std::max(peak, energies[static_cast<size_t>(k)]);
  }
  if (!(peak > 0.0))
    throw InvalidInputError("segmental_snr: zero-energy reference");

  Real acc = 0.0;
  int active = 0;
  for (Index k = 0; k < num_frames; ++k) {
    if (energies[static_cast<size_t>(k)] < kActiveFrameRatio * peak) continue;
    const Index len = std::min(frame_len, n - k * frame_len);
    acc += projected_snr_db(est.samples.segment(k * frame_len, len),
                            ref.samples.segment(k * frame_len, len),
                            kSegSnrMinDb, kSegSnrMaxDb);
    ++active;
  }
  return acc / active;
}

EvalReport aggregate_report(std::vector<UtteranceEval> utterances) {
  std::sort(utterances.begin(), utterances.end(),
            [](const UtteranceEval& a, const UtteranceEval& b) {
              return a.id < b.id;
            });

  EvalReport report;
  report.total = static_cast<int>(utterances.size());
  report.per_bin.clear();
  for (const char* label : kBinLabels) {
    BinStats s;
    s.label = label;
    report.per_bin.push_back(s);
  }

  Real sum_si = 0.0, sum_seg = 0.0;
  for (const UtteranceEval& u : utterances) {
    const auto it = std::find_if(
        report.per_bin.begin(), report.per_bin.end(),
        [&](const BinStats& s) { return s.label == u.doa_bin; });
    if (it == report.per_bin.end())
      throw InvalidInputError("aggregate_report: unknown DOA bin '" +
                              u.doa_bin + "'");
    it->count += 1;
    it->mean_si_sdr_db += u.si_sdr_db;
    it->mean_seg_snr_db += u.seg_snr_db;
    sum_si += u.si_sdr_db;
    sum_seg += u.seg_snr_db;
  }
  for (BinStats& s : report.per_bin) {
    if (s.count > 0) {
      s.mean_si_sdr_db /= s.count;
      s.mean_seg_snr_db /= s.count;
    }
  }
  if (report.total > 0) {
    report.mean_si_sdr_db = sum_si / report.total;
    report.mean_seg_snr_db = sum_seg / report.total;
  }
  report.utterances = std::move(utterances);
  return report;
}

EvalReport evaluate_manifest(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& outputs_dir) {
  const std::vector<MixturePair> pairs = load_manifest(manifest_path);

  std::string missing;
  for (const MixturePair& pair : pairs) {
    const auto p = outputs_dir / (pair.id + ".wav");
    if (!std::filesystem::exists(p)) missing += (missing.empty() ? "" : ", ") + pair.id;
  }
  if (!missing.empty())
    throw IoError("missing system outputs for: " + missing);

  std::vector<UtteranceEval> rows;
  for (const MixturePair& pair : pairs) {
    Waveform est = read_wav_mono((outputs_dir / (pair.id + ".wav")).string());
    Waveform ref = pair.anechoic_target;
    const Index n = std::min(est.samples.size(), ref.samples.size());
    if (n == 0) throw InvalidInputError("evaluate_manifest: empty signals for " + pair.id);
    est.samples.conservativeResize(n);
    ref.samples.conservativeResize(n);

    UtteranceEval row;
    row.id = pair.id;
    row.doa_bin = doa_bin_label(pair.meta.doa_diff_deg());
    row.t60_s = pair.meta.t60_s;
    row.snr_in_db = pair.meta.snr_db;
    row.si_sdr_db = si_sdr(est, ref);
    row.seg_snr_db = segmental_snr(est, ref);
    rows.push_back(std::move(row));
  }
  return aggregate_report(std::move(rows));
}

namespace {

std::string fmt_db(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<Real>& v) {
  return v ? fmt_db(*v) : std::string();
}

}  // namespace

void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << "# mcse_eval_v1\n";
  out << "id,doa_bin,t60_s,snr_in_db,si_sdr_db,seg_snr_db,pesq,estoi,dnsmos\n";
  for (const UtteranceEval& u : report.utterances) {
    out << u.id << ',' << u.doa_bin << ',' << fmt_db(u.t60_s) << ','
        << fmt_db(u.snr_in_db) << ',' << fmt_db(u.si_sdr_db) << ','
        << fmt_db(u.seg_snr_db) << ',' << fmt_opt(u.pesq) << ','
        << fmt_opt(u.estoi) << ',' << fmt_opt(u.dnsmos) << '\n';
  }
  if (!out) throw IoError("failed writing report " + path.string());
}

void write_report_json(const EvalReport& report,
                       const std::filesystem::path& path) {
  json root;
  root["kind"] = "mcse_eval";
  root["schema_version"] = 1;
  root["total"] = report.total;
  root["mean_si_sdr_db"] = report.mean_si_sdr_db;
  root["mean_seg_snr_db"] = report.mean_seg_snr_db;

  root["per_bin"] = json::array();
  for (const BinStats& s : report.per_bin) {
    json b;
    b["doa_bin"] = s.label;
    b["count"] = s.count;
    if (s.count > 0) {
      b["mean_si_sdr_db"] = s.mean_si_sdr_db;
      b["mean_seg_snr_db"] = s.mean_seg_snr_db;
    } else {
      b["mean_si_sdr_db"] = nullptr;
      b["mean_seg_snr_db"] = nullptr;
    }
    root["per_bin"].push_back(b);
  }

  root["utterances"] = json::array();
  for (const UtteranceEval& u : report.utterances) {
    json r;
    r["id"] = u.id;
    r["doa_bin"] = u.doa_bin;
    r["t60_s"] = u.t60_s;
    r["snr_in_db"] = u.snr_in_db;
    r["si_sdr_db"] = u.si_sdr_db;
    r["seg_snr_db"] = u.seg_snr_db;
    r["pesq"] = u.pesq ? json(*u.pesq) : json(nullptr);
    r["estoi"] = u.estoi ? json(*u.estoi) : json(nullptr);
    r["dnsmos"] = u.dnsmos ? json(*u.dnsmos) : json(nullptr);
    root["utterances"].push_back(r);
  }

  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << root.dump(2) << "\n";
  if (!out) throw IoError("failed writing report " + path.string());
}

}  // namespace mcse
