#pragma once

#include <variant>

#include "robeig/sym_eig.hpp"

namespace robeig {

inline constexpr int kDefaultTaylorDegree = 9;
inline constexpr double kDefaultEpsilon = 0.01;

/// Upstream gradients dL/dV (d x d, column i belongs to v_i) and dL/dLambda.
struct GradSeed {
  Matrix grad_vectors;
  Vector grad_values;

  static GradSeed zeros(Eigen::Index d);
  /// Throws ShapeError / InvalidInputError.
  void validate(Eigen::Index d) const;
};

enum class KKind { analytic, taylor, clipped };

/// Off-diagonal coupling matrix used by the eigenvector gradient. Entry (i, j)
/// weighs the contribution of v_j to dv_i.
struct KMatrix {
  Matrix entries;
  KKind kind = KKind::analytic;
  /// Analytic kind only: at least one entry is non-finite (tied eigenvalues).
  bool degenerate = false;
};

/// entries(i, j) = 1 / (lambda_i - lambda_j). Ties are reported, not masked.
KMatrix ktilde_analytic(const Vector& values);

/// Degree-K geometric-series form. For i < j,
///   entries(i, j) = (1/lambda_i) * sum_{k=0..K} (lambda_j / lambda_i)^k
/// and entries(j, i) = -entries(i, j). Every value must be >= epsilon
/// (PreconditionError otherwise), which bounds every entry by (K + 1)/epsilon.
KMatrix ktilde_taylor(const Vector& values, int degree, double epsilon);

/// Analytic entries with magnitude capped at threshold. Tied pairs get
/// +threshold above the diagonal and -threshold below.
KMatrix ktilde_clip(const Vector& values, double threshold);

struct Analytic {};
struct Taylor {
  int degree = kDefaultTaylorDegree;
};
struct PIDeflation {
  int iterations = kDefaultTaylorDegree + 1;
};
struct Clip {
  double threshold = 100.0;
};

struct BackwardMethod {
  std::variant<Analytic, Taylor, PIDeflation, Clip> variant;
  double epsilon = kDefaultEpsilon;

  static BackwardMethod analytic(double epsilon = kDefaultEpsilon);
  static BackwardMethod taylor(int degree = kDefaultTaylorDegree, double epsilon = kDefaultEpsilon);
  static BackwardMethod pi_deflation(int iterations = kDefaultTaylorDegree + 1,
                                     double epsilon = kDefaultEpsilon);
  static BackwardMethod clip(double threshold = 100.0, double epsilon = kDefaultEpsilon);

  /// Throws InvalidInputError when a hyperparameter is out of range.
  void validate() const;
  const char* name() const;
};

/// K-matrix of the requested kind; PIDeflation has none (InvalidInputError).
KMatrix build_kmatrix(const Vector& values, const BackwardMethod& method);

struct EigBackward {
  Matrix grad;  ///< dL/dM as V((K^T o V^T dL/dV) + diag(dL/dLambda))V^T
  bool degenerate = false;
};

/// dL/dM for the requested backward method. The result is the unsymmetrised
/// matrix gradient; its symmetric part is what a symmetric perturbation of M
/// sees. PIDeflation reconstructs M from the decomposition and runs the
/// deflation backward with default breaking rules.
EigBackward backward_eig(const EigenDecomp& decomp, const GradSeed& seed,
                         const BackwardMethod& method);

/// Variant taking an already built K-matrix.
Matrix backward_eig_with(const EigenDecomp& decomp, const GradSeed& seed, const KMatrix& k);

/// Contribution of eigenvector i alone:
///   sum_{j != i} K(i, j) v_j v_j^T g v_i^T.
Matrix eigvec_gradient_term(const EigenDecomp& decomp, const KMatrix& k, Eigen::Index i,
                            const Eigen::Ref<const Vector>& grad_vector);

/// n (K + 1) / epsilon * seed_norm.
double gradient_bound(int n, int degree, double epsilon, double seed_norm);

/// (g + g^T) / 2.
Matrix symmetric_part(const Matrix& g);

}  // namespace robeig
