// SPDX-License-Identifier: Apache-2.0
#include "mcse/beamform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "mcse/errors.hpp"

namespace mcse {

namespace {

constexpr Real kRefFloor = 1e-9;
constexpr Real kEigRefFloor = 1e-10;
constexpr Real kLogFloor = 1e-15;

ComplexVec frame_vector(const MultichannelSpectrogram& spec, Index t,
                        Index f) {
  ComplexVec x(spec.num_channels());
  for (Index m = 0; m < spec.num_channels(); ++m)
    x[m] = spec.channels[static_cast<size_t>(m)](t, f);
  return x;
}

void hermitize(ComplexMat& a) { a = ((a + a.adjoint()) * 0.5).eval(); }

// Principal eigenvector of a Hermitian PSD matrix, normalized to the
// reference entry; falls back to the reference selector when the reference
// response is numerically zero. Returns true when the eigen gap is low.
bool rtf_from_psd(const ComplexMat& phi, Real gap_threshold, ComplexVec* out) {
  const Index m = phi.rows();
  if (m == 1) {
    *out = ComplexVec::Ones(1);
    return false;
  }
  Eigen::SelfAdjointEigenSolver<ComplexMat> eig(phi);
  if (eig.info() != Eigen::Success)
    throw SingularMatrixError("estimate_rtf: eigendecomposition failed");
  const Real top = eig.eigenvalues()(m - 1);
  const Real second = std::max(eig.eigenvalues()(m - 2), 0.0);
  const bool low_gap = top < gap_threshold * second || top <= 0.0;

  ComplexVec v = eig.eigenvectors().col(m - 1);
  if (top <= 0.0 || (low_gap && std::abs(v[0]) < kEigRefFloor * v.norm())) {
    // Degenerate or ambiguous principal direction: deterministic tie-break.
    *out = ComplexVec::Zero(m);
    (*out)[0] = Complex(1.0, 0.0);
    return true;
  }
  if (std::abs(v[0]) < kEigRefFloor * v.norm())
    throw SingularRtfError(
        "estimate_rtf: reference element of the principal eigenvector is "
        "numerically zero");
  v /= v[0];
  v[0] = Complex(1.0, 0.0);
  *out = v;
  return low_gap;
}

// One MVDR solve. `where` names the bin (and frame) for error context.
ComplexVec mvdr_solve(const ComplexMat& phi, const ComplexVec& c, Real loading,
                      const std::string& where) {
  const Index m = phi.rows();
  const Real eps = loading * phi.real().trace() / static_cast<Real>(m);
  ComplexMat a = phi;
  a.diagonal().array() += Complex(eps, 0.0);
  const Eigen::LDLT<ComplexMat> ldlt(a);
  const ComplexVec num = ldlt.solve(c);
  const Complex den = c.dot(num);  // c^H num
  if (!std::isfinite(den.real()) || !std::isfinite(den.imag()) ||
      std::abs(den) < 1e-300 || !num.allFinite())
    throw SingularMatrixError("mvdr: singular covariance at " + where);
  return num / den;
}

}  // namespace

SpatialCovariance estimate_covariance(const MultichannelSpectrogram& spec) {
  const Index num_t = spec.num_frames();
  const Index num_f = spec.num_bins();
  const Index num_m = spec.num_channels();
  if (num_t == 0 || num_f == 0 || num_m == 0)
    throw InvalidInputError("estimate_covariance: empty spectrogram");

  SpatialCovariance cov;
  cov.per_freq.assign(static_cast<size_t>(num_f),
                      ComplexMat::Zero(num_m, num_m));
  for (Index f = 0; f < num_f; ++f) {
    ComplexMat& phi = cov.per_freq[static_cast<size_t>(f)];
    for (Index t = 0; t < num_t; ++t) {
      const ComplexVec x = frame_vector(spec, t, f);
      phi.noalias() += x * x.adjoint();
    }
    phi /= static_cast<Real>(num_t);
    hermitize(phi);
  }
  return cov;
}

FrameCovariance recursive_covariance(const MultichannelSpectrogram& spec,
                                     Real lambda) {
  if (lambda < 0.0 || lambda >= 1.0)
    throw InvalidInputError("recursive_covariance: lambda must be in [0, 1)");
  const Index num_t = spec.num_frames();
  const Index num_f = spec.num_bins();
  const Index num_m = spec.num_channels();
  if (num_t == 0 || num_f == 0 || num_m == 0)
    throw InvalidInputError("recursive_covariance: empty spectrogram");

  FrameCovariance out;
  out.num_frames = num_t;
  out.num_bins = num_f;
  out.data.reserve(static_cast<size_t>(num_t * num_f));
  std::vector<ComplexMat> state(static_cast<size_t>(num_f));
  for (Index t = 0; t < num_t; ++t) {
    for (Index f = 0; f < num_f; ++f) {
      const ComplexVec x = frame_vector(spec, t, f);
      ComplexMat& phi = state[static_cast<size_t>(f)];
      if (t == 0) {
        phi = x * x.adjoint();
      } else {
        phi = lambda * phi + (1.0 - lambda) * (x * x.adjoint());
      }
      out.data.push_back(phi);
    }
  }
  return out;
}

Rtf estimate_rtf(const SpatialCovariance& cov_speech, Real gap_threshold) {
  const Index num_f = cov_speech.num_bins();
  const Index num_m = cov_speech.num_mics();
  if (num_f == 0 || num_m == 0)
    throw InvalidInputError("estimate_rtf: empty covariance");

  Rtf rtf;
  rtf.vectors.resize(num_f, num_m);
  rtf.low_eigen_gap.assign(static_cast<size_t>(num_f), false);
  for (Index f = 0; f < num_f; ++f) {
    ComplexVec c;
    rtf.low_eigen_gap[static_cast<size_t>(f)] = rtf_from_psd(
        cov_speech.per_freq[static_cast<size_t>(f)], gap_threshold, &c);
    rtf.vectors.row(f) = c.transpose();
  }
  return rtf;
}

Rtf direct_path_rtf(const Rir& rir, const StftConfig& cfg) {
  cfg.validate();
  const Index num_m = rir.num_channels();
  if (num_m == 0 || rir.direct_path_delays.size() != size_t(num_m))
    throw InvalidInputError("direct_path_rtf: malformed impulse response");
  const Index win = std::lround(0.0025 * rir.sample_rate_hz);
  if (win > cfg.fft_len)
    throw InvalidInputError("direct_path_rtf: window exceeds fft size");

  const Index t0 = *std::min_element(rir.direct_path_delays.begin(),
                                     rir.direct_path_delays.end());
  const Index start = std::max<Index>(0, t0 - win / 4);
  const Index num_f = cfg.num_bins();

  Eigen::FFT<Real> fft;
  ComplexMat responses(num_f, num_m);
  std::vector<Complex> buf(static_cast<size_t>(cfg.fft_len));
  std::vector<Complex> spec(static_cast<size_t>(cfg.fft_len));
  for (Index m = 0; m < num_m; ++m) {
    std::fill(buf.begin(), buf.end(), Complex(0.0, 0.0));
    for (Index i = 0; i < win && start + i < rir.num_taps(); ++i)
      buf[static_cast<size_t>(i)] = Complex(rir.channels(m, start + i), 0.0);
    fft.fwd(spec, buf);
    for (Index f = 0; f < num_f; ++f)
      responses(f, m) = spec[static_cast<size_t>(f)];
  }

  const Real ref_peak = responses.col(0).cwiseAbs().maxCoeff();
  if (ref_peak <= 0.0)
    throw SingularRtfError(
        "direct_path_rtf: reference channel has no direct-path energy");

  Rtf rtf;
  rtf.vectors.resize(num_f, num_m);
  for (Index f = 0; f < num_f; ++f) {
    const Complex ref = responses(f, 0);
    if (std::abs(ref) < kRefFloor * ref_peak)
      throw SingularRtfError(
          "direct_path_rtf: reference response below floor at bin " +
          std::to_string(f));
    rtf.vectors.row(f) = responses.row(f) / ref;
    rtf.vectors(f, 0) = Complex(1.0, 0.0);
  }
  return rtf;
}

Rtf steering_rtf(const ArrayGeometry& array, Real theta_rad,
                 const StftConfig& cfg, int sample_rate_hz,
                 Real speed_of_sound) {
  cfg.validate();
  Rtf rtf;
  rtf.vectors.resize(cfg.num_bins(), array.num_mics());
  for (Index f = 0; f < cfg.num_bins(); ++f) {
    const Real freq =
        static_cast<Real>(f) * sample_rate_hz / cfg.fft_len;
    rtf.vectors.row(f) =
        steering_vector(array, theta_rad, freq, speed_of_sound).transpose();
    rtf.vectors(f, 0) = Complex(1.0, 0.0);
  }
  return rtf;
}

BeamformerWeights mvdr_weights(const SpatialCovariance& cov_noise,
                               const Rtf& rtf, Real loading) {
  const Index num_f = cov_noise.num_bins();
  const Index num_m = cov_noise.num_mics();
  if (rtf.num_bins() != num_f || rtf.num_mics() != num_m)
    throw InvalidInputError("mvdr_weights: rtf/covariance shape mismatch");
  if (loading < 0.0)
    throw InvalidInputError("mvdr_weights: loading must be >= 0");

  ComplexMat w(num_f, num_m);
  for (Index f = 0; f < num_f; ++f) {
    const ComplexVec c = rtf.vectors.row(f).transpose();
    w.row(f) = mvdr_solve(cov_noise.per_freq[static_cast<size_t>(f)], c,
                          loading, "bin " + std::to_string(f))
                   .transpose();
  }
  return BeamformerWeights{{w}};
}

BeamformerWeights mwf_weights(const SpatialCovariance& cov_speech,
                              const SpatialCovariance& cov_noise,
                              Real loading) {
  const Index num_f = cov_noise.num_bins();
  const Index num_m = cov_noise.num_mics();
  if (cov_speech.num_bins() != num_f || cov_speech.num_mics() != num_m)
    throw InvalidInputError("mwf_weights: covariance shape mismatch");
  if (loading < 0.0)
    throw InvalidInputError("mwf_weights: loading must be >= 0");

  ComplexMat w(num_f, num_m);
  for (Index f = 0; f < num_f; ++f) {
    const ComplexMat& phi_s = cov_speech.per_freq[static_cast<size_t>(f)];
    const ComplexMat& phi_n = cov_noise.per_freq[static_cast<size_t>(f)];
    const ComplexVec rhs = phi_s.col(0);
    if (rhs.cwiseAbs().maxCoeff() == 0.0) {
      w.row(f).setZero();
      continue;
    }
    ComplexMat a = phi_s + phi_n;
    const Real eps = loading * a.real().trace() / static_cast<Real>(num_m);
    a.diagonal().array() += Complex(eps, 0.0);
    const Eigen::LDLT<ComplexMat> ldlt(a);
    const ComplexVec wf = ldlt.solve(rhs);
    if (!wf.allFinite())
      throw SingularMatrixError("mwf_weights: singular covariance at bin " +
                                std::to_string(f));
    w.row(f) = wf.transpose();
  }
  return BeamformerWeights{{w}};
}

BeamformerWeights frame_mvdr(const MultichannelSpectrogram& oracle_speech,
                             const MultichannelSpectrogram& interference,
                             Real lambda, Real loading) {
  if (lambda < 0.0 || lambda >= 1.0)
    throw InvalidInputError("frame_mvdr: lambda must be in [0, 1)");
  const Index num_t = oracle_speech.num_frames();
  const Index num_f = oracle_speech.num_bins();
  const Index num_m = oracle_speech.num_channels();
  if (interference.num_frames() != num_t ||
      interference.num_bins() != num_f ||
      interference.num_channels() != num_m)
    throw InvalidInputError("frame_mvdr: stream shapes differ");
  if (num_t == 0 || num_f == 0 || num_m == 0)
    throw InvalidInputError("frame_mvdr: empty streams");

  BeamformerWeights weights;
  weights.w.assign(static_cast<size_t>(num_t), ComplexMat(num_f, num_m));
  std::vector<ComplexMat> phi_s(static_cast<size_t>(num_f));
  std::vector<ComplexMat> phi_n(static_cast<size_t>(num_f));
  for (Index t = 0; t < num_t; ++t) {
    for (Index f = 0; f < num_f; ++f) {
      const ComplexVec s = frame_vector(oracle_speech, t, f);
      const ComplexVec n = frame_vector(interference, t, f);
      ComplexMat& ps = phi_s[static_cast<size_t>(f)];
      ComplexMat& pn = phi_n[static_cast<size_t>(f)];
      if (t == 0) {
        ps = s * s.adjoint();
        pn = n * n.adjoint();
      } else {
        ps = lambda * ps + (1.0 - lambda) * (s * s.adjoint());
        pn = lambda * pn + (1.0 - lambda) * (n * n.adjoint());
      }
      ComplexVec c;
      rtf_from_psd(ps, 10.0, &c);
      weights.w[static_cast<size_t>(t)].row(f) =
          mvdr_solve(pn, c, loading,
                     "frame " + std::to_string(t) + ", bin " +
                         std::to_string(f))
              .transpose();
    }
  }
  return weights;
}

Spectrogram apply_beamformer(const BeamformerWeights& weights,
                             const MultichannelSpectrogram& spec) {
  const Index num_t = spec.num_frames();
  const Index num_f = spec.num_bins();
  const Index num_m = spec.num_channels();
  if (weights.num_bins() != num_f || weights.num_mics() != num_m)
    throw InvalidInputError("apply_beamformer: weight shape mismatch");
  if (!weights.time_invariant() && weights.num_frames() != num_t)
    throw InvalidInputError(
        "apply_beamformer: frame-varying weights must match frame count");

  Spectrogram out;
  out.config = spec.config;
  out.sample_rate_hz = spec.sample_rate_hz;
  out.data = ComplexArr2::Zero(num_t, num_f);
  for (Index t = 0; t < num_t; ++t) {
    const ComplexMat& w =
        weights.w[weights.time_invariant() ? 0 : static_cast<size_t>(t)];
    for (Index f = 0; f < num_f; ++f) {
      Complex acc(0.0, 0.0);
      for (Index m = 0; m < num_m; ++m)
        acc += std::conj(w(f, m)) *
               spec.channels[static_cast<size_t>(m)](t, f);
      out.data(t, f) = acc;
    }
  }
  return out;
}

Beampattern beampattern(const ComplexMat& weights_fm,
                        const ArrayGeometry& array, const RealVec& angles_rad,
                        const RealVec& freqs_hz, int sample_rate_hz,
                        int fft_len, Real speed_of_sound) {
  if (weights_fm.rows() == 0 || weights_fm.cols() != array.num_mics())
    throw InvalidInputError("beampattern: weight/array shape mismatch");
  if (angles_rad.size() == 0 || freqs_hz.size() == 0)
    throw InvalidInputError("beampattern: empty angle or frequency grid");
  if (fft_len <= 0 || sample_rate_hz <= 0)
    throw InvalidInputError("beampattern: bad fft_len or sample_rate_hz");

  Beampattern bp;
  bp.angles_rad = angles_rad;
  bp.freqs_hz.resize(freqs_hz.size());
  bp.db.resize(angles_rad.size(), freqs_hz.size());
  for (Index j = 0; j < freqs_hz.size(); ++j) {
    Index bin = static_cast<Index>(
        std::lround(freqs_hz[j] * fft_len / sample_rate_hz));
    bin = std::clamp<Index>(bin, 0, weights_fm.rows() - 1);
    const Real f_used =
        static_cast<Real>(bin) * sample_rate_hz / fft_len;
    bp.freqs_hz[j] = f_used;
    for (Index i = 0; i < angles_rad.size(); ++i) {
      const ComplexVec d =
          steering_vector(array, angles_rad[i], f_used, speed_of_sound);
      const Complex resp = weights_fm.row(bin).conjugate() * d;
      bp.db(i, j) = 20.0 * std::log10(std::max(std::abs(resp), kLogFloor));
    }
  }
  return bp;
}

}  // namespace mcse
