#pragma once

#include <vector>

#include "robeig/grad_core.hpp"

namespace robeig {

/// Stopping rules of the deflation loop.
struct BreakConfig {
  bool enabled = true;
  double epsilon = kDefaultEpsilon;
  /// Reject step i when |rayleigh_i - lambda_i| / lambda_i >= this.
  double rayleigh_tolerance = 0.1;
  /// Stop after step i once the top-i eigenvalues hold this share of the trace.
  double energy_threshold = 1.0 - 1e-4;

  static BreakConfig disabled() { return BreakConfig{.enabled = false}; }
};

enum class BreakReason {
  none,                ///< every eigenvector was accepted, no rule fired
  small_eigenvalue,    ///< lambda_i <= epsilon, step i rejected
  rayleigh_deviation,  ///< Rayleigh quotient drifted, step i rejected
  energy,              ///< energy exhausted, step i accepted and the loop ended
};

const char* to_string(BreakReason reason);

struct DeflationReport {
  /// Per attempted step: Rayleigh quotient on the running deflated matrix.
  std::vector<double> rayleigh;
  /// Per attempted step: |rayleigh_i - lambda_i| / lambda_i.
  std::vector<double> rayleigh_reldev;
  /// Per attempted step: cumulative energy share of the top-i eigenvalues.
  std::vector<double> energy;
  int rank = 0;
  BreakReason reason = BreakReason::none;
  /// 1-based step at which the reason fired; 0 when none did.
  int break_step = 0;
};

/// Forward half of the PI/deflation scheme. Holds, for every accepted
/// eigenvector v_i, the deflated matrix it is dominant in
/// (M_0 = M, M_i = M_{i-1} - M_{i-1} v_i v_i^T).
struct DeflationState {
  std::vector<Matrix> matrices;  ///< matrices[i] is M_i (the one v_{i+1} lives in)
  Matrix vectors;                ///< d x rank
  Vector rayleigh_values;        ///< length rank
  DeflationReport report;

  int rank() const noexcept { return report.rank; }
};

/// Runs the deflation loop over the eigenvectors of `decomp`. When
/// refine_iterations > 0 each vector is first refined by that many power
/// iterations on its deflated matrix; the default takes the SVD vectors as
/// the fixed point they are.
DeflationState deflate(const SymMatrix& m, const EigenDecomp& decomp, const BreakConfig& breaking,
                       int refine_iterations = 0);

/// Power-iteration gradient of one eigenvector in closed summed form:
///   sum_{k=0}^{iterations-1} A^k (I - v v^T) / ||A v||^{k+1} * g v^T
/// where A is the matrix v is dominant in.
Matrix pi_eigvec_gradient_term(const Matrix& a, const Eigen::Ref<const Vector>& v,
                               const Eigen::Ref<const Vector>& grad_vector, int iterations);

/// Backward half: sum of pi_eigvec_gradient_term over accepted ranks plus
/// the eigenvalue terms dL/dlambda_i v_i v_i^T.
Matrix pi_backward(const DeflationState& state, const GradSeed& seed, int iterations);

struct PiBackward {
  Matrix grad;
  DeflationReport report;
};

PiBackward backward_pi_deflation(const SymMatrix& m, const EigenDecomp& decomp,
                                 const GradSeed& seed, int iterations,
                                 const BreakConfig& breaking);

}  // namespace robeig
