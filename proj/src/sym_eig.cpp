#include "robeig/sym_eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "robeig/error.hpp"

namespace robeig {

bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

SymMatrix::SymMatrix(const Matrix& entries, double epsilon) : epsilon_(epsilon) {
  if (entries.rows() != entries.cols()) {
    throw InvalidInputError("SymMatrix: matrix is not square");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInputError("SymMatrix: epsilon must be finite and >= 0");
  }
  if (!entries.allFinite()) {
    throw InvalidInputError("SymMatrix: non-finite entry");
  }
  // (a + b) * 0.5 is commutative in IEEE arithmetic, so the result is
  // bitwise symmetric.
  entries_ = (entries + entries.transpose()) * 0.5;
}

Matrix EigenDecomp::reconstruct() const {
  return vectors * values.asDiagonal() * vectors.transpose();
}

DataMatrix center_rows(const DataMatrix& x) {
  const Vector mu = x.rowwise().mean();
  return x.colwise() - mu;
}

SymMatrix covariance(const DataMatrix& x, double epsilon) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw InvalidInputError("covariance: empty data matrix");
  }
  if (!x.allFinite()) {
    throw InvalidInputError("covariance: non-finite input");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInputError("covariance: epsilon must be finite and >= 0");
  }
  const DataMatrix xc = center_rows(x);
  Matrix m = xc * xc.transpose();
  m.diagonal().array() += epsilon;
  return SymMatrix(m, epsilon);
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j) sum += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(sum);
}

// One Jacobi rotation zeroing a(p, q); columns p, q of v are rotated alike.
void rotate(Matrix& a, Matrix& v, Eigen::Index p, Eigen::Index q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double app = a(p, p);
  const double aqq = a(q, q);
  const double theta = 0.5 * (aqq - app) / apq;
  double t;
  if (std::abs(theta) > 1e150) {
    t = 0.5 / theta;
  } else {
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;

  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == p || k == q) continue;
    const double akp = a(k, p);
    const double akq = a(k, q);
    const double new_kp = c * akp - s * akq;
    const double new_kq = s * akp + c * akq;
    a(k, p) = new_kp;
    a(p, k) = new_kp;
    a(k, q) = new_kq;
    a(q, k) = new_kq;
  }
  a(p, p) = app - t * apq;
  a(q, q) = aqq + t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  for (Eigen::Index k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

void fix_signs(Matrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double mag = std::abs(vectors(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

EigenDecomp eig_sym(const SymMatrix& m, const JacobiOptions& options) {
  const Eigen::Index n = m.dim();
  Matrix a = m.entries();
  Matrix v = Matrix::Identity(n, n);

  const double target = options.tolerance * a.norm();
  double off = off_diagonal_norm(a);
  int sweep = 0;
  while (off > target) {
    if (sweep == options.max_sweeps) {
      throw ConvergenceError(
          "eig_sym: Jacobi did not converge in " + std::to_string(options.max_sweeps) +
              " sweeps (off-diagonal norm " + std::to_string(off) + ")",
          off);
    }
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) rotate(a, v, p, q);
    }
    off = off_diagonal_norm(a);
    ++sweep;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  EigenDecomp out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  fix_signs(out.vectors);
  return out;
}

Vector eigenvalues_sym(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.entries(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eigenvalues_sym: tridiagonal QR failed", 0.0);
  }
  // Eigen returns ascending order.
  return solver.eigenvalues().reverse();
}

Vector clamp_eigenvalues(const Vector& values, double epsilon) {
  return values.cwiseMax(epsilon);
}

}  // namespace robeig
