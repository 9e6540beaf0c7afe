#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "robeig/grad_core.hpp"
#include "robeig/pi_deflation.hpp"

namespace robeig {

/// Spectral function applied to the clamped eigenvalues when building the
/// transform S = V f(Lambda) V^T.
enum class SpectralFn {
  inverse_sqrt,      ///< lambda^{-1/2}, ZCA whitening
  power,             ///< lambda^alpha
  normalized_power,  ///< lambda^alpha / sqrt(sum_k lambda_k^{2 alpha})
};

/// Everything a spectral-layer backward pass needs from its forward call.
struct SpectralContext {
  DataMatrix centered;        ///< X - mu 1^T
  EigenDecomp decomp;         ///< eigenvectors and clamped eigenvalues of M
  Vector raw_values;          ///< eigenvalues before clamping
  Eigen::Array<bool, Eigen::Dynamic, 1> clamped;
  Vector f_values;
  Matrix transform;           ///< S
  SpectralFn fn = SpectralFn::inverse_sqrt;
  double alpha = -0.5;
  BackwardMethod method;
  bool affine = false;
  Vector gamma;

  Eigen::Index dim() const noexcept { return centered.rows(); }
  Eigen::Index samples() const noexcept { return centered.cols(); }
};

struct LayerGrads {
  DataMatrix grad_input;
  Vector grad_gamma;  ///< empty for layers without affine parameters
  Vector grad_beta;
  Matrix grad_cov;    ///< dL/dM as produced by the eigen backward
  bool degenerate = false;
};

/// Running statistics and affine parameters of a ZCA whitening layer.
///
/// The Taylor-style layer tracks a running covariance E_M and derives the
/// eval transform from it; the PI-style layer tracks the running whitening
/// matrix E_S itself. Both start from E_mu = 0 and the identity.
class ZcaState {
 public:
  enum class Running { covariance, subspace };

  ZcaState(Eigen::Index dim, Running kind = Running::covariance,
           double epsilon = kDefaultEpsilon, double momentum = 0.1);

  Eigen::Index dim() const noexcept { return running_mean_.size(); }
  Running kind() const noexcept { return kind_; }
  double epsilon() const noexcept { return epsilon_; }
  double momentum() const noexcept { return momentum_; }

  const Vector& running_mean() const noexcept { return running_mean_; }
  /// E_M for the covariance kind, E_S for the subspace kind.
  const Matrix& running_matrix() const noexcept { return running_matrix_; }
  /// Number of training updates folded into the running statistics.
  int steps() const noexcept { return steps_; }
  /// True once eval mode has statistics to use.
  bool initialized() const noexcept { return initialized_; }

  Vector& gamma() noexcept { return gamma_; }
  Vector& beta() noexcept { return beta_; }
  const Vector& gamma() const noexcept { return gamma_; }
  const Vector& beta() const noexcept { return beta_; }

  /// Installs finalized statistics directly (e.g. restored from a checkpoint).
  void set_running_stats(const Vector& mean, const Matrix& matrix);

  /// E <- m * batch + (1 - m) * E for both mean and matrix.
  void update(const Vector& batch_mean, const Matrix& batch_matrix);

  /// Eval-mode transform, recomputed only after the statistics change.
  const Matrix& eval_transform() const;

 private:
  Running kind_;
  double epsilon_;
  double momentum_;
  Vector running_mean_;
  Matrix running_matrix_;
  Vector gamma_;
  Vector beta_;
  int steps_ = 0;
  bool initialized_ = false;
  mutable std::optional<Matrix> eval_cache_;
};

struct ZcaForward {
  DataMatrix output;
  SpectralContext context;
};

/// Training-mode ZCA whitening with full-spectrum eigendecomposition:
/// output = gamma o (S X~) + beta with S = V max(Lambda, eps)^{-1/2} V^T.
/// Updates the running mean and running covariance of `state`.
ZcaForward zca_forward_train(const DataMatrix& x, ZcaState& state, const BackwardMethod& method);

/// Eval-mode whitening from the running statistics. StateError when the
/// state has never been trained or loaded.
DataMatrix zca_forward_eval(const DataMatrix& x, const ZcaState& state);

/// Backward through a ZCA (or any spectral) forward call.
LayerGrads zca_backward(const SpectralContext& context, const DataMatrix& grad_out);

struct PiConfig {
  int iterations = kDefaultTaylorDegree + 1;
  BreakConfig breaking;
  int refine_iterations = 0;
};

struct ZcaPiContext {
  DataMatrix centered;
  DeflationState deflation;
  Matrix transform;
  Vector gamma;
  int iterations = kDefaultTaylorDegree + 1;
};

struct ZcaPiForward {
  DataMatrix output;
  ZcaPiContext context;
};

/// Training-mode ZCA whitening through the deflation loop: the transform is
/// built from the accepted (truncated) eigenvectors and their Rayleigh
/// quotients. Updates the running mean and running subspace of `state`.
ZcaPiForward zca_pi_forward_train(const DataMatrix& x, ZcaState& state, const PiConfig& config);

LayerGrads zca_pi_backward(const ZcaPiContext& context, const DataMatrix& grad_out);

struct PoolingConfig {
  double alpha = 0.5;
  bool normalized = false;
  double epsilon = kDefaultEpsilon;
};

struct SopForward {
  DataMatrix output;
  SpectralContext context;
};

/// Second-order pooling: output = S X~ with S = V f(Lambda) V^T. Stateless.
SopForward sop_forward(const DataMatrix& x, const PoolingConfig& config,
                       const BackwardMethod& method = BackwardMethod::taylor());

/// Backward through sop_forward; no affine parameters.
LayerGrads sop_backward(const SpectralContext& context, const DataMatrix& grad_out);

/// f(values) for the given spectral function.
Vector apply_spectral_fn(const Vector& values, SpectralFn fn, double alpha);

/// Splits the feature rows of x into `groups` equal consecutive blocks.
std::vector<DataMatrix> split_feature_groups(const DataMatrix& x, int groups);
DataMatrix merge_feature_groups(const std::vector<DataMatrix>& parts);

struct GroupedZcaForward {
  DataMatrix output;
  std::vector<SpectralContext> contexts;
};

/// Block-diagonal ZCA: one independent layer per feature group.
GroupedZcaForward grouped_zca_forward_train(const DataMatrix& x, std::vector<ZcaState>& states,
                                            const BackwardMethod& method);
DataMatrix grouped_zca_backward(const std::vector<SpectralContext>& contexts,
                                const DataMatrix& grad_out);

}  // namespace robeig
