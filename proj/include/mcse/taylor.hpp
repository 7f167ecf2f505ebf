// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mcse/beamform.hpp"
#include "mcse/stft.hpp"
#include "mcse/types.hpp"

namespace mcse {

// One high-order term of the output expansion. Order 0 (the beamformed
// spectrum) is carried separately as a Spectrogram.
struct TaylorTerm {
  int order = 0;
  ComplexArr2 value;  // T x F
};

// Per-channel additive correction toward the direct speech image. In
// oracle mode delta = direct_speech - mixture, i.e. minus the interference.
struct CorrectionTerm {
  std::vector<ComplexArr2> delta;  // M entries, each T x F

  Index num_channels() const { return static_cast<Index>(delta.size()); }
};

// The update driving each recursion step. The contracted form feeds
// sum_m delta_m * dT(q)/dX_m, which makes the recursion exact for known
// operators; the literal form drops the delta factor (the shape a learned
// operator would absorb) and is kept for comparison but is not exact.
enum class RecursionForm { kContracted, kLiteral };

struct TaylorConfig {
  int num_orders = 3;  // Q: number of high-order terms
  std::string operator_tag = "analytic-linear";
  bool factorial_scaling = true;

  void validate() const;
};

// Shared inputs an operator may draw on. Owning pointers stay with the
// caller; operators validate that the fields they need are present.
struct OperatorContext {
  const MultichannelSpectrogram* mixture = nullptr;
  const BeamformerWeights* weights = nullptr;
  const CorrectionTerm* correction = nullptr;
};

// Estimates the derivative-contraction update for one recursion step.
class DerivativeOperator {
 public:
  virtual ~DerivativeOperator() = default;
  virtual ComplexArr2 step(const TaylorTerm& term,
                           const OperatorContext& ctx) const = 0;
};

// Closed-form operator for the linear filter G(X) = w^H X with oracle
// corrections: the first update is w^H delta, the second is -w^H delta,
// and every later one vanishes. With the contracted form this reproduces
// the expansion of w^H (X + delta) exactly.
class AnalyticLinearOperator : public DerivativeOperator {
 public:
  explicit AnalyticLinearOperator(RecursionForm form = RecursionForm::kContracted)
      : form_(form) {}
  ComplexArr2 step(const TaylorTerm& term,
                   const OperatorContext& ctx) const override;

 private:
  RecursionForm form_;
};

// Emits zeros; the pipeline then reduces to the 0th-order beamformer.
class ZeroOperator : public DerivativeOperator {
 public:
  ComplexArr2 step(const TaylorTerm& term,
                   const OperatorContext& ctx) const override;
};

// Adapter for externally supplied update rules (e.g. deserialized
// parametric models). Only the tensor contract is fixed: consume the
// current term plus context, emit a T x F matrix.
class CallbackOperator : public DerivativeOperator {
 public:
  using Fn = std::function<ComplexArr2(const TaylorTerm&, const OperatorContext&)>;
  explicit CallbackOperator(Fn fn) : fn_(std::move(fn)) {}
  ComplexArr2 step(const TaylorTerm& term,
                   const OperatorContext& ctx) const override;

 private:
  Fn fn_;
};

// Factory for the CLI operator tags: "analytic-linear", "zero".
std::unique_ptr<DerivativeOperator> make_operator(const std::string& tag,
                                                  RecursionForm form =
                                                      RecursionForm::kContracted);

// 0th-order output: identical to apply_beamformer, named for the pipeline.
Spectrogram zeroth_order(const MultichannelSpectrogram& spec,
                         const BeamformerWeights& weights);

// Oracle correction delta = direct_speech - mixture, per channel.
CorrectionTerm oracle_correction(const MultichannelSpectrogram& mixture,
                                 const MultichannelSpectrogram& direct_speech);

// One recursion step: T(q+1) = q * T(q) + operator.step(T(q), ctx).
TaylorTerm taylor_step(const TaylorTerm& term, const DerivativeOperator& op,
                       const OperatorContext& ctx);

// Final estimate: S0 plus every term, scaled by 1/q! when
// cfg.factorial_scaling is set. Terms must carry orders 1..Q exactly once.
Spectrogram superimpose(const Spectrogram& s0,
                        const std::vector<TaylorTerm>& terms,
                        const TaylorConfig& cfg);

struct TaylorResult {
  Spectrogram s0;
  std::vector<TaylorTerm> terms;  // orders 1..Q
  Spectrogram final;
};

// Full pipeline: beamform, recurse Q times, superimpose.
TaylorResult run_taylor_pipeline(const MultichannelSpectrogram& mixture,
                                 const BeamformerWeights& weights,
                                 const DerivativeOperator& op,
                                 const OperatorContext& ctx,
                                 const TaylorConfig& cfg);

// ---------------------------------------------------------------------------
// Scalar probes: the same order recursion on real test functions, used to
// validate the algebra against exact derivatives.

// Dense univariate polynomial with ascending coefficients.
class Polynomial {
 public:
  Polynomial() : coeffs_{0.0} {}
  explicit Polynomial(std::vector<Real> coeffs);

  Real operator()(Real x) const;
  Polynomial derivative() const;
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<Real>& coeffs() const { return coeffs_; }

  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial scaled(Real s) const;

 private:
  std::vector<Real> coeffs_;
};

struct ScalarTaylorTrace {
  std::vector<Real> terms;  // T(q) evaluated at x0, q = 0..Q
  Real sum = 0.0;           // T(0) + sum_q T(q)/q!
};

// Order recursion with exact symbolic differentiation of each term.
ScalarTaylorTrace scalar_taylor_polynomial(const Polynomial& g, Real x0,
                                           Real delta0, int num_orders,
                                           RecursionForm form =
                                               RecursionForm::kContracted);

// Same recursion with Richardson-extrapolated central differences in place
// of the symbolic derivative. Noise compounds with nesting depth; h around
// 1e-3 keeps five nested levels stable.
ScalarTaylorTrace scalar_taylor_finite_difference(
    const std::function<Real(Real)>& g, Real x0, Real delta0, int num_orders,
    Real step_h = 1e-3);

// Reference values T(q) = g^{(q)}(x0) * delta0^q computed directly.
std::vector<Real> polynomial_direct_terms(const Polynomial& g, Real x0,
                                          Real delta0, int num_orders);

// ---------------------------------------------------------------------------
// Losses.

struct LossWeights {
  Real alpha = 1.0;
  Real beta = 1.0;
};

// Mean over all bins of squared real error + squared imaginary error +
// squared magnitude error, computed on power-compressed spectra.
Real ri_mag_loss(const Spectrogram& est, const Spectrogram& ref,
                 Real compression = 0.5);

// alpha * ri_mag_loss(s0, bf_label) + beta * ri_mag_loss(s_final, target).
Real multiobjective_loss(const Spectrogram& s0, const Spectrogram& s_final,
                         const Spectrogram& bf_label, const Spectrogram& target,
                         const LossWeights& weights = {},
                         Real compression = 0.5);

}  // namespace mcse
