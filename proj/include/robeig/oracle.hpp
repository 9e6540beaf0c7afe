#pragma once

#include <functional>

#include "robeig/sym_eig.hpp"

namespace robeig::oracle {

struct FdConfig {
  double step = 1e-6;
};

using SymLoss = std::function<double(const SymMatrix&)>;
using MatrixLoss = std::function<double(const Matrix&)>;

/// Central differences over symmetric perturbations. The diagonal probe is
/// h e_i e_i^T; the off-diagonal probe is h (e_i e_j^T + e_j e_i^T) / 2, so the
/// result equals the symmetric part of the matrix gradient (loss = ||M||_F^2
/// gives 2M). Throws OracleError if any probe returns a non-finite loss.
Matrix finite_diff_grad(const SymLoss& loss, const SymMatrix& m, const FdConfig& cfg = {});

/// Plain entry-wise central differences over an unconstrained matrix.
Matrix finite_diff_grad_entrywise(const MatrixLoss& loss, const Matrix& x,
                                  const FdConfig& cfg = {});

/// `iterations` steps of v <- M v / ||M v||. BreakdownError if ||M v|| < 1e-30.
Vector power_iteration(const Matrix& m, const Vector& v0, int iterations);

/// v^T M v / v^T v. InvalidInputError for the zero vector.
double rayleigh(const Matrix& m, const Vector& v);

/// Angle between the true third K-matrix column and its degree-K Taylor
/// approximation in the plane of three neighbouring eigenvalues, in degrees.
/// q2 = lambda_2/lambda_1, q3 = lambda_3/lambda_1 with 0 < q3 <= q2 <= 1.
/// The q2 == q3 case uses the limit where the true column is vertical.
double angular_residual(double q2, double q3, int degree);

/// Unsigned angle in degrees between two vectors. Vectors holding infinite
/// entries are replaced by their limiting direction (the infinite entries,
/// with sign, at equal weight; finite entries dropped).
double direction_angle_degrees(const Vector& a, const Vector& b);

}  // namespace robeig::oracle
