#include "robeig/grad_core.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "robeig/error.hpp"
#include "robeig/pi_deflation.hpp"

namespace robeig {

GradSeed GradSeed::zeros(Eigen::Index d) {
  return GradSeed{Matrix::Zero(d, d), Vector::Zero(d)};
}

void GradSeed::validate(Eigen::Index d) const {
  if (grad_vectors.rows() != d || grad_vectors.cols() != d || grad_values.size() != d) {
    throw ShapeError("GradSeed: shape does not match decomposition of dimension " +
                     std::to_string(d));
  }
  if (!grad_vectors.allFinite() || !grad_values.allFinite()) {
    throw InvalidInputError("GradSeed: non-finite entry");
  }
}

KMatrix ktilde_analytic(const Vector& values) {
  const Eigen::Index n = values.size();
  KMatrix k{Matrix::Zero(n, n), KKind::analytic, false};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double e = 1.0 / (values(i) - values(j));
      k.entries(i, j) = e;
      if (!std::isfinite(e)) k.degenerate = true;
    }
  }
  return k;
}

namespace {

// (1/big) * sum_{k=0..degree} (small/big)^k, evaluated by Horner.
double taylor_series(double big, double small, int degree) {
  const double ratio = small / big;
  double acc = 1.0;
  for (int k = 0; k < degree; ++k) acc = 1.0 + ratio * acc;
  return acc / big;
}

}  // namespace

KMatrix ktilde_taylor(const Vector& values, int degree, double epsilon) {
  if (degree < 0) throw InvalidInputError("ktilde_taylor: degree must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidInputError("ktilde_taylor: epsilon must be > 0");
  const Eigen::Index n = values.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(values(i) >= epsilon)) {
      throw PreconditionError("ktilde_taylor: eigenvalue " + std::to_string(values(i)) +
                              " below epsilon; clamp first");
    }
  }
  KMatrix k{Matrix::Zero(n, n), KKind::taylor, false};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      // Expand around the larger value so the ratio stays in (0, 1] even when
      // round-off leaves a tied pair marginally out of order.
      const double big = std::max(values(i), values(j));
      const double small = std::min(values(i), values(j));
      const double e = taylor_series(big, small, degree);
      k.entries(i, j) = e;
      k.entries(j, i) = -e;
    }
  }
  return k;
}

KMatrix ktilde_clip(const Vector& values, double threshold) {
  if (!(threshold > 0.0)) throw InvalidInputError("ktilde_clip: threshold must be > 0");
  const Eigen::Index n = values.size();
  KMatrix k{Matrix::Zero(n, n), KKind::clipped, false};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double gap = values(i) - values(j);
      double e;
      if (gap == 0.0) {
        e = threshold;
      } else {
        const double inv = 1.0 / gap;
        e = std::copysign(std::min(std::abs(inv), threshold), inv);
      }
      k.entries(i, j) = e;
      k.entries(j, i) = -e;
    }
  }
  return k;
}

BackwardMethod BackwardMethod::analytic(double epsilon) {
  return BackwardMethod{Analytic{}, epsilon};
}
BackwardMethod BackwardMethod::taylor(int degree, double epsilon) {
  return BackwardMethod{Taylor{degree}, epsilon};
}
BackwardMethod BackwardMethod::pi_deflation(int iterations, double epsilon) {
  return BackwardMethod{PIDeflation{iterations}, epsilon};
}
BackwardMethod BackwardMethod::clip(double threshold, double epsilon) {
  return BackwardMethod{Clip{threshold}, epsilon};
}

void BackwardMethod::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInputError("BackwardMethod: epsilon must be > 0");
  }
  if (const auto* t = std::get_if<Taylor>(&variant); t && t->degree < 1) {
    throw InvalidInputError("BackwardMethod: Taylor degree K must be >= 1");
  }
  if (const auto* p = std::get_if<PIDeflation>(&variant); p && p->iterations < 1) {
    throw InvalidInputError("BackwardMethod: PI iterations must be >= 1");
  }
  if (const auto* c = std::get_if<Clip>(&variant); c && !(c->threshold > 0.0)) {
    throw InvalidInputError("BackwardMethod: clip threshold must be > 0");
  }
}

const char* BackwardMethod::name() const {
  switch (variant.index()) {
    case 0: return "analytic";
    case 1: return "taylor";
    case 2: return "pi";
    default: return "clip";
  }
}

KMatrix build_kmatrix(const Vector& values, const BackwardMethod& method) {
  if (std::holds_alternative<Analytic>(method.variant)) return ktilde_analytic(values);
  if (const auto* t = std::get_if<Taylor>(&method.variant)) {
    return ktilde_taylor(values, t->degree, method.epsilon);
  }
  if (const auto* c = std::get_if<Clip>(&method.variant)) {
    return ktilde_clip(values, c->threshold);
  }
  throw InvalidInputError("build_kmatrix: PI deflation has no K-matrix");
}

Matrix backward_eig_with(const EigenDecomp& decomp, const GradSeed& seed, const KMatrix& k) {
  const Matrix& v = decomp.vectors;
  Matrix inner = k.entries.transpose().cwiseProduct(v.transpose() * seed.grad_vectors);
  inner.diagonal() += seed.grad_values;
  return v * inner * v.transpose();
}

EigBackward backward_eig(const EigenDecomp& decomp, const GradSeed& seed,
                         const BackwardMethod& method) {
  method.validate();
  seed.validate(decomp.dim());
  if (const auto* p = std::get_if<PIDeflation>(&method.variant)) {
    const SymMatrix m(decomp.reconstruct());
    BreakConfig breaking;
    breaking.epsilon = method.epsilon;
    auto result = backward_pi_deflation(m, decomp, seed, p->iterations, breaking);
    return EigBackward{std::move(result.grad), false};
  }
  const KMatrix k = build_kmatrix(decomp.values, method);
  EigBackward out{backward_eig_with(decomp, seed, k), k.degenerate};
  if (!out.grad.allFinite()) out.degenerate = true;
  return out;
}

Matrix eigvec_gradient_term(const EigenDecomp& decomp, const KMatrix& k, Eigen::Index i,
                            const Eigen::Ref<const Vector>& grad_vector) {
  const Matrix& v = decomp.vectors;
  Vector w = (v.transpose() * grad_vector).cwiseProduct(k.entries.row(i).transpose());
  w(i) = 0.0;
  return (v * w) * v.col(i).transpose();
}

double gradient_bound(int n, int degree, double epsilon, double seed_norm) {
  if (!(epsilon > 0.0)) throw InvalidInputError("gradient_bound: epsilon must be > 0");
  return static_cast<double>(n) * static_cast<double>(degree + 1) / epsilon * seed_norm;
}

Matrix symmetric_part(const Matrix& g) {
  return (g + g.transpose()) * 0.5;
}

}  // namespace robeig
