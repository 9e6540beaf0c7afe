#include "robeig/oracle.hpp"

#include <cmath>
#include <numbers>

#include "robeig/error.hpp"

namespace robeig::oracle {

namespace {

double checked(double value) {
  if (!std::isfinite(value)) throw OracleError("finite_diff: loss returned a non-finite value");
  return value;
}

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

}  // namespace

Matrix finite_diff_grad(const SymLoss& loss, const SymMatrix& m, const FdConfig& cfg) {
  if (!(cfg.step > 0.0)) throw InvalidInputError("finite_diff_grad: step must be > 0");
  const Eigen::Index n = m.dim();
  const double h = cfg.step;
  Matrix grad(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      Matrix probe = Matrix::Zero(n, n);
      if (i == j) {
        probe(i, i) = h;
      } else {
        probe(i, j) = 0.5 * h;
        probe(j, i) = 0.5 * h;
      }
      const double up = checked(loss(SymMatrix(m.entries() + probe, m.epsilon())));
      const double down = checked(loss(SymMatrix(m.entries() - probe, m.epsilon())));
      const double g = (up - down) / (2.0 * h);
      grad(i, j) = g;
      grad(j, i) = g;
    }
  }
  return grad;
}

Matrix finite_diff_grad_entrywise(const MatrixLoss& loss, const Matrix& x, const FdConfig& cfg) {
  if (!(cfg.step > 0.0)) throw InvalidInputError("finite_diff_grad_entrywise: step must be > 0");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double saved = probe(i, j);
      probe(i, j) = saved + cfg.step;
      const double up = checked(loss(probe));
      probe(i, j) = saved - cfg.step;
      const double down = checked(loss(probe));
      probe(i, j) = saved;
      grad(i, j) = (up - down) / (2.0 * cfg.step);
    }
  }
  return grad;
}

Vector power_iteration(const Matrix& m, const Vector& v0, int iterations) {
  if (iterations < 1) throw InvalidInputError("power_iteration: iterations must be >= 1");
  if (v0.size() != m.rows()) throw ShapeError("power_iteration: size mismatch");
  Vector v = v0;
  for (int k = 0; k < iterations; ++k) {
    const Vector mv = m * v;
    const double norm = mv.norm();
    if (norm < 1e-30) throw BreakdownError("power_iteration: ||M v|| collapsed");
    v = mv / norm;
  }
  return v;
}

double rayleigh(const Matrix& m, const Vector& v) {
  const double vv = v.squaredNorm();
  if (vv == 0.0) throw InvalidInputError("rayleigh: zero vector");
  return v.dot(m * v) / vv;
}

double angular_residual(double q2, double q3, int degree) {
  if (!(q3 > 0.0) || !(q3 <= q2) || !(q2 <= 1.0)) {
    throw InvalidInputError("angular_residual: need 0 < q3 <= q2 <= 1");
  }
  if (degree < 0) throw InvalidInputError("angular_residual: degree must be >= 0");
  const double p = static_cast<double>(degree + 1);
  // 1 - x^p for x in (0, 1], without cancellation near x = 1.
  const auto one_minus_pow = [p](double log_x) { return -std::expm1(p * log_x); };

  if (q2 == q3) {
    if (q3 == 1.0) return 0.0;  // all three eigenvalues equal
    // True column (finite, infinite): alpha = 90 deg. Approximation in units
    // of lambda_1: ((1 - q3^p) / (1 - q3), p / q2).
    const double k13 = one_minus_pow(std::log(q3)) / (1.0 - q3);
    const double k23 = p / q2;
    return std::atan2(k23, k13) * kDegPerRad - 90.0;
  }
  const double tan_alpha = (1.0 - q3) / (q2 - q3);
  const double log_ratio = std::log1p(-(q2 - q3) / q2);  // log(q3 / q2)
  const double numer = one_minus_pow(log_ratio);
  const double denom = one_minus_pow(std::log(q3));
  if (denom == 0.0) return 0.0;  // q3 == 1 forces q2 == q3 == 1
  const double tan_beta = tan_alpha * numer / denom;
  return (std::atan(tan_beta) - std::atan(tan_alpha)) * kDegPerRad;
}

namespace {

Vector limiting_direction(const Vector& a) {
  if (a.allFinite()) return a;
  Vector out = Vector::Zero(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::isinf(a(i))) out(i) = a(i) > 0 ? 1.0 : -1.0;
  }
  return out;
}

}  // namespace

double direction_angle_degrees(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("direction_angle_degrees: size mismatch");
  const Vector x = limiting_direction(a);
  const Vector y = limiting_direction(b);
  if (x.hasNaN() || y.hasNaN()) {
    throw InvalidInputError("direction_angle_degrees: NaN entry");
  }
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw InvalidInputError("direction_angle_degrees: zero vector");
  // atan2 form stays accurate for nearly parallel vectors.
  const Vector xu = x / nx;
  const Vector yu = y / ny;
  const double sin_part = (xu - yu).norm();
  const double cos_part = (xu + yu).norm();
  return 2.0 * std::atan2(sin_part, cos_part) * kDegPerRad;
}

}  // namespace robeig::oracle
