// SPDX-License-Identifier: Apache-2.0
#include "mcse/taylor.hpp"

#include <algorithm>
#include <cmath>

#include "mcse/errors.hpp"

namespace mcse {

namespace {

void require_context_fields(const OperatorContext& ctx, bool need_weights,
                            bool need_correction, const char* who) {
  if (need_weights && ctx.weights == nullptr)
    throw InvalidInputError(std::string(who) + ": context is missing beamformer weights");
  if (need_correction && ctx.correction == nullptr)
    throw InvalidInputError(std::string(who) + ": context is missing the oracle correction");
}

// sum_m conj(w_m(f)) * delta_m(t, f) for time-invariant weights.
ComplexArr2 weighted_correction(const BeamformerWeights& weights,
                                const CorrectionTerm& corr) {
  if (corr.num_channels() == 0)
    throw InvalidInputError("analytic-linear: empty correction");
  if (!weights.time_invariant())
    throw InvalidInputError("analytic-linear: requires time-invariant weights");
  const ComplexMat& w = weights.w[0];  // F x M
  if (w.cols() != corr.num_channels())
    throw InvalidInputError("analytic-linear: weight/correction channel mismatch");
  const Index num_t = corr.delta[0].rows();
  const Index num_f = corr.delta[0].cols();
  if (w.rows() != num_f)
    throw InvalidInputError("analytic-linear: weight/correction bin mismatch");

  ComplexArr2 out = ComplexArr2::Zero(num_t, num_f);
  for (Index m = 0; m < corr.num_channels(); ++m) {
    const ComplexArr2& d = corr.delta[static_cast<size_t>(m)];
    if (d.rows() != num_t || d.cols() != num_f)
      throw InvalidInputError("analytic-linear: ragged correction tensor");
    for (Index f = 0; f < num_f; ++f)
      out.col(f) += std::conj(w(f, m)) * d.col(f);
  }
  return out;
}

// sum_m conj(w_m(f)), broadcast over frames.
ComplexArr2 weight_row_sum(const BeamformerWeights& weights, Index num_t) {
  const ComplexMat& w = weights.w[0];
  ComplexArr2 out(num_t, w.rows());
  for (Index f = 0; f < w.rows(); ++f)
    out.col(f).setConstant(w.row(f).conjugate().sum());
  return out;
}

}  // namespace

void TaylorConfig::validate() const {
  if (num_orders < 0)
    throw InvalidInputError("taylor config: the number of orders must be >= 0");
}

ComplexArr2 AnalyticLinearOperator::step(const TaylorTerm& term,
                                         const OperatorContext& ctx) const {
  require_context_fields(ctx, true, true, "analytic-linear");
  const CorrectionTerm& corr = *ctx.correction;
  if (term.order >= 2)
    return ComplexArr2::Zero(term.value.rows(), term.value.cols());

  if (form_ == RecursionForm::kContracted) {
    const ComplexArr2 contraction = weighted_correction(*ctx.weights, corr);
    return term.order == 0 ? contraction : ComplexArr2(-contraction);
  }
  const ComplexArr2 bare = weight_row_sum(*ctx.weights, term.value.rows());
  return term.order == 0 ? bare : ComplexArr2(-bare);
}

ComplexArr2 ZeroOperator::step(const TaylorTerm& term,
                               const OperatorContext&) const {
  return ComplexArr2::Zero(term.value.rows(), term.value.cols());
}

ComplexArr2 CallbackOperator::step(const TaylorTerm& term,
                                   const OperatorContext& ctx) const {
  if (!fn_) throw InvalidInputError("callback operator: empty callable");
  ComplexArr2 out = fn_(term, ctx);
  if (out.rows() != term.value.rows() || out.cols() != term.value.cols())
    throw InvalidInputError("callback operator: update shape must match the term");
  return out;
}

std::unique_ptr<DerivativeOperator> make_operator(const std::string& tag,
                                                  RecursionForm form) {
  if (tag == "analytic-linear")
    return std::make_unique<AnalyticLinearOperator>(form);
  if (tag == "zero") return std::make_unique<ZeroOperator>();
  throw InvalidInputError("unknown derivative operator '" + tag + "'");
}

Spectrogram zeroth_order(const MultichannelSpectrogram& spec,
                         const BeamformerWeights& weights) {
  return apply_beamformer(weights, spec);
}

CorrectionTerm oracle_correction(const MultichannelSpectrogram& mixture,
                                 const MultichannelSpectrogram& direct_speech) {
  if (mixture.num_channels() != direct_speech.num_channels() ||
      mixture.num_channels() == 0)
    throw InvalidInputError("oracle_correction: channel count mismatch");
  CorrectionTerm corr;
  for (Index m = 0; m < mixture.num_channels(); ++m) {
    const ComplexArr2& x = mixture.channels[static_cast<size_t>(m)];
    const ComplexArr2& s = direct_speech.channels[static_cast<size_t>(m)];
    if (x.rows() != s.rows() || x.cols() != s.cols())
      throw InvalidInputError("oracle_correction: shape mismatch at channel " +
                              std::to_string(m));
    corr.delta.push_back(s - x);
  }
  return corr;
}

TaylorTerm taylor_step(const TaylorTerm& term, const DerivativeOperator& op,
                       const OperatorContext& ctx) {
  if (term.order < 0) throw InvalidInputError("taylor_step: negative order");
  TaylorTerm next;
  next.order = term.order + 1;
  next.value = static_cast<Real>(term.order) * term.value + op.step(term, ctx);
  return next;
}

Spectrogram superimpose(const Spectrogram& s0,
                        const std::vector<TaylorTerm>& terms,
                        const TaylorConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(terms.size()) != cfg.num_orders)
    throw InvalidInputError("superimpose: expected exactly " +
                            std::to_string(cfg.num_orders) + " terms, got " +
                            std::to_string(terms.size()));
  std::vector<bool> seen(static_cast<size_t>(cfg.num_orders) + 1, false);
  for (const TaylorTerm& t : terms) {
    if (t.order < 1 || t.order > cfg.num_orders)
      throw InvalidInputError("superimpose: term order " +
                              std::to_string(t.order) + " outside 1..Q");
    if (seen[static_cast<size_t>(t.order)])
      throw InvalidInputError("superimpose: duplicate term order " +
                              std::to_string(t.order));
    seen[static_cast<size_t>(t.order)] = true;
    if (t.value.rows() != s0.data.rows() || t.value.cols() != s0.data.cols())
      throw InvalidInputError("superimpose: term shape mismatch at order " +
                              std::to_string(t.order));
  }

  Spectrogram out = s0;
  Real factorial = 1.0;
  std::vector<const TaylorTerm*> by_order(static_cast<size_t>(cfg.num_orders) + 1,
                                          nullptr);
  for (const TaylorTerm& t : terms) by_order[static_cast<size_t>(t.order)] = &t;
  for (int q = 1; q <= cfg.num_orders; ++q) {
    factorial *= q;
    const Real scale = cfg.factorial_scaling ? 1.0 / factorial : 1.0;
    out.data += scale * by_order[static_cast<size_t>(q)]->value;
  }
  return out;
}

TaylorResult run_taylor_pipeline(const MultichannelSpectrogram& mixture,
                                 const BeamformerWeights& weights,
                                 const DerivativeOperator& op,
                                 const OperatorContext& ctx,
                                 const TaylorConfig& cfg) {
  cfg.validate();
  TaylorResult result;
  result.s0 = zeroth_order(mixture, weights);

  TaylorTerm current;
  current.order = 0;
  current.value = result.s0.data;
  for (int q = 0; q < cfg.num_orders; ++q) {
    current = taylor_step(current, op, ctx);
    result.terms.push_back(current);
  }
  result.final = superimpose(result.s0, result.terms, cfg);
  return result;
}

// ---------------------------------------------------------------------------

Polynomial::Polynomial(std::vector<Real> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) coeffs_.push_back(0.0);
  while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
}

Real Polynomial::operator()(Real x) const {
  Real acc = 0.0;
  for (size_t i = coeffs_.size(); i-- > 0;) acc = acc * x + coeffs_[i];
  return acc;
}

Polynomial Polynomial::derivative() const {
  if (coeffs_.size() == 1) return Polynomial({0.0});
  std::vector<Real> d(coeffs_.size() - 1);
  for (size_t i = 1; i < coeffs_.size(); ++i)
    d[i - 1] = static_cast<Real>(i) * coeffs_[i];
  return Polynomial(std::move(d));
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  std::vector<Real> c(std::max(coeffs_.size(), other.coeffs_.size()), 0.0);
  for (size_t i = 0; i < coeffs_.size(); ++i) c[i] += coeffs_[i];
  for (size_t i = 0; i < other.coeffs_.size(); ++i) c[i] += other.coeffs_[i];
  return Polynomial(std::move(c));
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  std::vector<Real> c(coeffs_.size() + other.coeffs_.size() - 1, 0.0);
  for (size_t i = 0; i < coeffs_.size(); ++i)
    for (size_t j = 0; j < other.coeffs_.size(); ++j)
      c[i + j] += coeffs_[i] * other.coeffs_[j];
  return Polynomial(std::move(c));
}

Polynomial Polynomial::scaled(Real s) const {
  std::vector<Real> c = coeffs_;
  for (Real& v : c) v *= s;
  return Polynomial(std::move(c));
}

ScalarTaylorTrace scalar_taylor_polynomial(const Polynomial& g, Real x0,
                                           Real delta0, int num_orders,
                                           RecursionForm form) {
  if (num_orders < 0)
    throw InvalidInputError("scalar taylor: the number of orders must be >= 0");
  // delta as a function of the expansion point: (x0 + delta0) - x.
  const Polynomial delta({x0 + delta0, -1.0});

  ScalarTaylorTrace trace;
  Polynomial term = g;
  trace.terms.push_back(term(x0));
  trace.sum = trace.terms[0];
  Real factorial = 1.0;
  for (int q = 0; q < num_orders; ++q) {
    const Polynomial update = form == RecursionForm::kContracted
                                  ? delta * term.derivative()
                                  : term.derivative();
    term = term.scaled(static_cast<Real>(q)) + update;
    factorial *= (q + 1);
    trace.terms.push_back(term(x0));
    trace.sum += term(x0) / factorial;
  }
  return trace;
}

ScalarTaylorTrace scalar_taylor_finite_difference(
    const std::function<Real(Real)>& g, Real x0, Real delta0, int num_orders,
    Real step_h) {
  if (!g) throw InvalidInputError("scalar taylor: empty test function");
  if (num_orders < 0)
    throw InvalidInputError("scalar taylor: the number of orders must be >= 0");
  if (!(step_h > 0.0)) throw InvalidInputError("scalar taylor: step must be > 0");

  const Real shifted = x0 + delta0;
  ScalarTaylorTrace trace;
  std::function<Real(Real)> term = g;
  trace.terms.push_back(term(x0));
  trace.sum = trace.terms[0];
  Real factorial = 1.0;
  for (int q = 0; q < num_orders; ++q) {
    auto derivative = [term, step_h](Real x) {
      const auto central = [&](Real h) {
        return (term(x + h) - term(x - h)) / (2.0 * h);
      };
      return (4.0 * central(step_h / 2.0) - central(step_h)) / 3.0;
    };
    term = [q, prev = term, derivative, shifted](Real x) {
      return static_cast<Real>(q) * prev(x) + (shifted - x) * derivative(x);
    };
    factorial *= (q + 1);
    trace.terms.push_back(term(x0));
    trace.sum += term(x0) / factorial;
  }
  return trace;
}

std::vector<Real> polynomial_direct_terms(const Polynomial& g, Real x0,
                                          Real delta0, int num_orders) {
  std::vector<Real> terms;
  Polynomial d = g;
  Real delta_pow = 1.0;
  terms.push_back(d(x0));
  for (int q = 1; q <= num_orders; ++q) {
    d = d.derivative();
    delta_pow *= delta0;
    terms.push_back(d(x0) * delta_pow);
  }
  return terms;
}

// ---------------------------------------------------------------------------

Real ri_mag_loss(const Spectrogram& est, const Spectrogram& ref,
                 Real compression) {
  if (est.data.rows() != ref.data.rows() || est.data.cols() != ref.data.cols())
    throw InvalidInputError("ri_mag_loss: shape mismatch");
  if (est.data.size() == 0) throw InvalidInputError("ri_mag_loss: empty spectra");
  const Spectrogram ce = compress_power(est, compression);
  const Spectrogram cr = compress_power(ref, compression);
  const RealArr2 re = ce.data.real() - cr.data.real();
  const RealArr2 im = ce.data.imag() - cr.data.imag();
  const RealArr2 mag = ce.data.abs() - cr.data.abs();
  return (re.square() + im.square() + mag.square()).mean();
}

Real multiobjective_loss(const Spectrogram& s0, const Spectrogram& s_final,
                         const Spectrogram& bf_label, const Spectrogram& target,
                         const LossWeights& weights, Real compression) {
  if (weights.alpha < 0.0 || weights.beta < 0.0)
    throw InvalidInputError("multiobjective_loss: weights must be non-negative");
  return weights.alpha * ri_mag_loss(s0, bf_label, compression) +
         weights.beta * ri_mag_loss(s_final, target, compression);
}

}  // namespace mcse
