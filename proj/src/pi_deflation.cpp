#include "robeig/pi_deflation.hpp"

#include <cmath>

#include "robeig/error.hpp"

namespace robeig {

const char* to_string(BreakReason reason) {
  switch (reason) {
    case BreakReason::none: return "none";
    case BreakReason::small_eigenvalue: return "small_eigenvalue";
    case BreakReason::rayleigh_deviation: return "rayleigh_deviation";
    case BreakReason::energy: return "energy";
  }
  return "unknown";
}

DeflationState deflate(const SymMatrix& m, const EigenDecomp& decomp, const BreakConfig& breaking,
                       int refine_iterations) {
  const Eigen::Index n = decomp.dim();
  if (m.dim() != n) throw ShapeError("deflate: matrix and decomposition disagree in size");

  DeflationState state;
  state.matrices.reserve(static_cast<std::size_t>(n));
  const double total = decomp.values.sum();

  Matrix current = m.entries();
  Matrix accepted(n, n);
  Vector accepted_values(n);
  double cumulative = 0.0;
  int rank = 0;

  for (Eigen::Index i = 0; i < n; ++i) {
    Vector v = decomp.vectors.col(i);
    for (int it = 0; it < refine_iterations; ++it) {
      const Vector mv = current * v;
      const double norm = mv.norm();
      if (norm < 1e-30) break;
      v = mv / norm;
    }
    const double lambda = decomp.values(i);
    const double rayleigh = v.dot(current * v) / v.squaredNorm();
    const double reldev = std::abs(rayleigh - lambda) / lambda;
    cumulative += lambda;
    const double energy = cumulative / total;

    state.report.rayleigh.push_back(rayleigh);
    state.report.rayleigh_reldev.push_back(reldev);
    state.report.energy.push_back(energy);

    const int step = static_cast<int>(i) + 1;
    if (breaking.enabled) {
      if (lambda <= breaking.epsilon) {
        state.report.reason = BreakReason::small_eigenvalue;
        state.report.break_step = step;
        break;
      }
      if (!(reldev < breaking.rayleigh_tolerance)) {
        state.report.reason = BreakReason::rayleigh_deviation;
        state.report.break_step = step;
        break;
      }
    }

    // Accept step i.
    state.matrices.push_back(current);
    accepted.col(rank) = v;
    accepted_values(rank) = rayleigh;
    ++rank;
    current -= (current * v) * v.transpose();

    if (breaking.enabled && energy >= breaking.energy_threshold) {
      state.report.reason = BreakReason::energy;
      state.report.break_step = step;
      break;
    }
  }

  state.report.rank = rank;
  state.vectors = accepted.leftCols(rank);
  state.rayleigh_values = accepted_values.head(rank);
  return state;
}

Matrix pi_eigvec_gradient_term(const Matrix& a, const Eigen::Ref<const Vector>& v,
                               const Eigen::Ref<const Vector>& grad_vector, int iterations) {
  if (iterations < 1) throw InvalidInputError("pi_eigvec_gradient_term: iterations must be >= 1");
  const double scale = (a * v).norm();
  if (!(scale > 0.0)) throw BreakdownError("pi_eigvec_gradient_term: ||A v|| vanished");
  // u_k = A^k (I - v v^T) g / ||A v||^{k+1}
  Vector u = (grad_vector - v * v.dot(grad_vector)) / scale;
  Vector sum = u;
  for (int k = 1; k < iterations; ++k) {
    u = (a * u) / scale;
    sum += u;
  }
  return sum * v.transpose();
}

Matrix pi_backward(const DeflationState& state, const GradSeed& seed, int iterations) {
  const Eigen::Index n = seed.grad_values.size();
  Matrix grad = Matrix::Zero(n, n);
  for (int i = 0; i < state.rank(); ++i) {
    const auto v = state.vectors.col(i);
    grad += pi_eigvec_gradient_term(state.matrices[static_cast<std::size_t>(i)], v,
                                    seed.grad_vectors.col(i), iterations);
    grad.noalias() += seed.grad_values(i) * (v * v.transpose());
  }
  return grad;
}

PiBackward backward_pi_deflation(const SymMatrix& m, const EigenDecomp& decomp,
                                 const GradSeed& seed, int iterations,
                                 const BreakConfig& breaking) {
  seed.validate(decomp.dim());
  if (iterations < 1) throw InvalidInputError("backward_pi_deflation: iterations must be >= 1");
  DeflationState state = deflate(m, decomp, breaking);
  return PiBackward{pi_backward(state, seed, iterations), std::move(state.report)};
}

}  // namespace robeig
