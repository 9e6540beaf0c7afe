#pragma once

#include <Eigen/Dense>

namespace robeig {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Features x samples. Every entry must be finite.
using DataMatrix = Eigen::MatrixXd;

/// Dense real symmetric matrix. Symmetry is exact: the constructor averages
/// the input with its transpose, so entries(i,j) == entries(j,i) bitwise.
class SymMatrix {
 public:
  SymMatrix() = default;
  /// Throws InvalidInputError on non-square or non-finite input, or epsilon < 0.
  explicit SymMatrix(const Matrix& entries, double epsilon = 0.0);

  const Matrix& entries() const noexcept { return entries_; }
  /// The ridge that was added to the diagonal when the matrix was built.
  double epsilon() const noexcept { return epsilon_; }
  Eigen::Index dim() const noexcept { return entries_.rows(); }

 private:
  Matrix entries_;
  double epsilon_ = 0.0;
};

/// M = V diag(values) V^T with orthonormal columns and values descending.
struct EigenDecomp {
  Matrix vectors;
  Vector values;

  Eigen::Index dim() const noexcept { return values.size(); }
  Matrix reconstruct() const;
};

struct JacobiOptions {
  /// Stop when the off-diagonal Frobenius norm is at most tolerance * ||M||_F.
  double tolerance = 1e-12;
  int max_sweeps = 100;
};

/// Centred scatter matrix (X - mu 1^T)(X - mu 1^T)^T + epsilon I, with mu the
/// row-wise mean. Note: no division by the sample count.
SymMatrix covariance(const DataMatrix& x, double epsilon);

/// Returns the row-centred copy of x.
DataMatrix center_rows(const DataMatrix& x);

/// Full eigendecomposition by cyclic Jacobi rotations.
///
/// Output is deterministic: values are sorted descending (ties stay in the
/// order Jacobi produced them) and each eigenvector is oriented so that its
/// entry of largest magnitude is nonnegative. Throws ConvergenceError when
/// the sweep budget is exhausted.
EigenDecomp eig_sym(const SymMatrix& m, const JacobiOptions& options = {});

/// Eigenvalues only, descending. Backed by Eigen's tridiagonal QR solver;
/// meant for spectrum statistics on large matrices where eigenvectors are
/// not needed.
Vector eigenvalues_sym(const SymMatrix& m);

/// out[i] = max(values[i], epsilon).
Vector clamp_eigenvalues(const Vector& values, double epsilon);

/// Orients every column so that its largest-magnitude entry is nonnegative.
void fix_signs(Matrix& vectors);

bool all_finite(const Eigen::Ref<const Matrix>& m);

}  // namespace robeig
