#include "robeig/layers.hpp"

#include <cmath>
#include <string>

#include "robeig/error.hpp"

namespace robeig {

// ---------------------------------------------------------------- ZcaState

ZcaState::ZcaState(Eigen::Index dim, Running kind, double epsilon, double momentum)
    : kind_(kind),
      epsilon_(epsilon),
      momentum_(momentum),
      running_mean_(Vector::Zero(dim)),
      running_matrix_(Matrix::Identity(dim, dim)),
      gamma_(Vector::Ones(dim)),
      beta_(Vector::Zero(dim)) {
  if (dim < 1) throw InvalidInputError("ZcaState: dimension must be >= 1");
  if (!(momentum > 0.0 && momentum <= 1.0)) {
    throw InvalidInputError("ZcaState: momentum must lie in (0, 1]");
  }
  if (!(epsilon >= 0.0)) throw InvalidInputError("ZcaState: epsilon must be >= 0");
}

void ZcaState::set_running_stats(const Vector& mean, const Matrix& matrix) {
  if (mean.size() != dim() || matrix.rows() != dim() || matrix.cols() != dim()) {
    throw ShapeError("ZcaState::set_running_stats: shape mismatch");
  }
  running_mean_ = mean;
  running_matrix_ = (matrix + matrix.transpose()) * 0.5;
  initialized_ = true;
  eval_cache_.reset();
}

void ZcaState::update(const Vector& batch_mean, const Matrix& batch_matrix) {
  if (batch_mean.size() != dim() || batch_matrix.rows() != dim()) {
    throw ShapeError("ZcaState::update: shape mismatch");
  }
  running_mean_ = momentum_ * batch_mean + (1.0 - momentum_) * running_mean_;
  running_matrix_ = momentum_ * batch_matrix + (1.0 - momentum_) * running_matrix_;
  ++steps_;
  initialized_ = true;
  eval_cache_.reset();
}

const Matrix& ZcaState::eval_transform() const {
  if (!initialized_) {
    throw StateError("ZcaState: eval requested before any training step or loaded statistics");
  }
  if (!eval_cache_) {
    if (kind_ == Running::subspace) {
      eval_cache_ = running_matrix_;
    } else {
      const EigenDecomp e = eig_sym(SymMatrix(running_matrix_));
      const Vector f = apply_spectral_fn(clamp_eigenvalues(e.values, epsilon_),
                                         SpectralFn::inverse_sqrt, -0.5);
      eval_cache_ = e.vectors * f.asDiagonal() * e.vectors.transpose();
    }
  }
  return *eval_cache_;
}

// ------------------------------------------------------- spectral machinery

Vector apply_spectral_fn(const Vector& values, SpectralFn fn, double alpha) {
  switch (fn) {
    case SpectralFn::inverse_sqrt:
      return values.array().rsqrt().matrix();
    case SpectralFn::power:
      return values.array().pow(alpha).matrix();
    case SpectralFn::normalized_power: {
      const Vector p = values.array().pow(alpha).matrix();
      return p / std::sqrt(values.array().pow(2.0 * alpha).sum());
    }
  }
  return values;
}

namespace {

void check_data(const DataMatrix& x, Eigen::Index dim, const char* where) {
  if (x.cols() < 2) throw InvalidInputError(std::string(where) + ": need n >= 2 samples");
  if (x.rows() != dim) {
    throw ShapeError(std::string(where) + ": data has " + std::to_string(x.rows()) +
                     " features, layer expects " + std::to_string(dim));
  }
  if (!x.allFinite()) throw InvalidInputError(std::string(where) + ": non-finite input");
}

// Eigendecomposition, clamping and transform shared by ZCA and pooling.
SpectralContext spectral_forward(const DataMatrix& x, double epsilon, SpectralFn fn, double alpha,
                                 const BackwardMethod& method) {
  SpectralContext ctx;
  ctx.centered = center_rows(x);
  Matrix m = ctx.centered * ctx.centered.transpose();
  m.diagonal().array() += epsilon;
  ctx.decomp = eig_sym(SymMatrix(m, epsilon));
  ctx.raw_values = ctx.decomp.values;
  ctx.clamped = ctx.raw_values.array() < epsilon;
  ctx.decomp.values = clamp_eigenvalues(ctx.raw_values, epsilon);
  ctx.fn = fn;
  ctx.alpha = alpha;
  ctx.f_values = apply_spectral_fn(ctx.decomp.values, fn, alpha);
  const Matrix& v = ctx.decomp.vectors;
  ctx.transform = v * ctx.f_values.asDiagonal() * v.transpose();
  ctx.method = method;
  return ctx;
}

// dL/dlambda given h_i = dL/df_i, zeroed where the clamp is active.
Vector spectral_value_grad(const SpectralContext& ctx, const Vector& h) {
  const Vector& lam = ctx.decomp.values;
  Vector g(lam.size());
  switch (ctx.fn) {
    case SpectralFn::inverse_sqrt:
      g = (-0.5 * h.array() * lam.array().pow(-1.5)).matrix();
      break;
    case SpectralFn::power:
      g = (ctx.alpha * h.array() * lam.array().pow(ctx.alpha - 1.0)).matrix();
      break;
    case SpectralFn::normalized_power: {
      const double a = ctx.alpha;
      const double norm = std::sqrt(lam.array().pow(2.0 * a).sum());
      const double weighted = (h.array() * lam.array().pow(a)).sum();
      g = (a * h.array() * lam.array().pow(a - 1.0) / norm -
           a * lam.array().pow(2.0 * a - 1.0) * weighted / (norm * norm * norm))
              .matrix();
      break;
    }
  }
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (ctx.clamped(i)) g(i) = 0.0;
  }
  return g;
}

void check_grad_out(const DataMatrix& grad_out, Eigen::Index rows, Eigen::Index cols,
                    const char* where) {
  if (grad_out.rows() != rows || grad_out.cols() != cols) {
    throw StateError(std::string(where) + ": gradient shape does not match the cached forward");
  }
}

DataMatrix uncenter(const DataMatrix& grad_centered) {
  return grad_centered.colwise() - grad_centered.rowwise().mean();
}

}  // namespace

// ------------------------------------------------------------- Taylor ZCA

ZcaForward zca_forward_train(const DataMatrix& x, ZcaState& state, const BackwardMethod& method) {
  if (state.kind() != ZcaState::Running::covariance) {
    throw StateError("zca_forward_train: state tracks a running subspace, use zca_pi_forward_train");
  }
  check_data(x, state.dim(), "zca_forward_train");
  method.validate();

  ZcaForward out;
  out.context = spectral_forward(x, state.epsilon(), SpectralFn::inverse_sqrt, -0.5, method);
  out.context.affine = true;
  out.context.gamma = state.gamma();

  const DataMatrix white = out.context.transform * out.context.centered;
  out.output = (white.array().colwise() * state.gamma().array()).colwise() + state.beta().array();

  Matrix batch_cov = out.context.centered * out.context.centered.transpose();
  batch_cov.diagonal().array() += state.epsilon();
  state.update(x.rowwise().mean(), SymMatrix(batch_cov).entries());
  return out;
}

DataMatrix zca_forward_eval(const DataMatrix& x, const ZcaState& state) {
  if (x.rows() != state.dim()) throw ShapeError("zca_forward_eval: feature dimension mismatch");
  if (!x.allFinite()) throw InvalidInputError("zca_forward_eval: non-finite input");
  const Matrix& s = state.eval_transform();
  const DataMatrix white = s * (x.colwise() - state.running_mean());
  return (white.array().colwise() * state.gamma().array()).colwise() + state.beta().array();
}

LayerGrads zca_backward(const SpectralContext& ctx, const DataMatrix& grad_out) {
  check_grad_out(grad_out, ctx.dim(), ctx.samples(), "zca_backward");
  LayerGrads grads;

  DataMatrix weighted = grad_out;
  if (ctx.affine) {
    const DataMatrix white = ctx.transform * ctx.centered;
    grads.grad_gamma = grad_out.cwiseProduct(white).rowwise().sum();
    grads.grad_beta = grad_out.rowwise().sum();
    weighted = (grad_out.array().colwise() * ctx.gamma.array()).matrix();
  }

  const Matrix grad_s = weighted * ctx.centered.transpose();
  const Matrix& v = ctx.decomp.vectors;

  GradSeed seed;
  seed.grad_vectors = (grad_s + grad_s.transpose()) * v * ctx.f_values.asDiagonal();
  const Vector h = (v.transpose() * grad_s * v).diagonal();
  seed.grad_values = spectral_value_grad(ctx, h);

  EigBackward eig = backward_eig(ctx.decomp, seed, ctx.method);
  grads.degenerate = eig.degenerate;
  grads.grad_cov = std::move(eig.grad);

  DataMatrix grad_centered = ctx.transform * weighted;
  grad_centered.noalias() += (grads.grad_cov + grads.grad_cov.transpose()) * ctx.centered;
  grads.grad_input = uncenter(grad_centered);
  return grads;
}

// ----------------------------------------------------------------- PI ZCA

ZcaPiForward zca_pi_forward_train(const DataMatrix& x, ZcaState& state, const PiConfig& config) {
  if (state.kind() != ZcaState::Running::subspace) {
    throw StateError("zca_pi_forward_train: state tracks a running covariance, use zca_forward_train");
  }
  check_data(x, state.dim(), "zca_pi_forward_train");
  if (config.iterations < 1) throw InvalidInputError("zca_pi_forward_train: iterations must be >= 1");

  ZcaPiForward out;
  ZcaPiContext& ctx = out.context;
  ctx.centered = center_rows(x);
  ctx.iterations = config.iterations;
  ctx.gamma = state.gamma();

  Matrix m = ctx.centered * ctx.centered.transpose();
  m.diagonal().array() += state.epsilon();
  const SymMatrix sym(m, state.epsilon());
  const EigenDecomp decomp = eig_sym(sym);
  BreakConfig breaking = config.breaking;
  breaking.epsilon = state.epsilon();
  ctx.deflation = deflate(sym, decomp, breaking, config.refine_iterations);

  const Matrix& vt = ctx.deflation.vectors;
  const Vector f = ctx.deflation.rayleigh_values.array().rsqrt().matrix();
  ctx.transform = vt * f.asDiagonal() * vt.transpose();

  const DataMatrix white = ctx.transform * ctx.centered;
  out.output = (white.array().colwise() * state.gamma().array()).colwise() + state.beta().array();
  state.update(x.rowwise().mean(), ctx.transform);
  return out;
}

LayerGrads zca_pi_backward(const ZcaPiContext& ctx, const DataMatrix& grad_out) {
  check_grad_out(grad_out, ctx.centered.rows(), ctx.centered.cols(), "zca_pi_backward");
  const Eigen::Index d = ctx.centered.rows();
  LayerGrads grads;

  const DataMatrix white = ctx.transform * ctx.centered;
  grads.grad_gamma = grad_out.cwiseProduct(white).rowwise().sum();
  grads.grad_beta = grad_out.rowwise().sum();
  const DataMatrix weighted = (grad_out.array().colwise() * ctx.gamma.array()).matrix();
  const Matrix grad_s = weighted * ctx.centered.transpose();

  const int rank = ctx.deflation.rank();
  const Matrix& vt = ctx.deflation.vectors;
  const Vector& lam = ctx.deflation.rayleigh_values;
  GradSeed seed = GradSeed::zeros(d);
  const Matrix sym2 = grad_s + grad_s.transpose();
  for (int i = 0; i < rank; ++i) {
    const auto vi = vt.col(i);
    seed.grad_vectors.col(i) = sym2 * vi / std::sqrt(lam(i));
    seed.grad_values(i) = -0.5 * std::pow(lam(i), -1.5) * vi.dot(grad_s * vi);
  }
  grads.grad_cov = pi_backward(ctx.deflation, seed, ctx.iterations);
  grads.degenerate = !grads.grad_cov.allFinite();

  DataMatrix grad_centered = ctx.transform * weighted;
  grad_centered.noalias() += (grads.grad_cov + grads.grad_cov.transpose()) * ctx.centered;
  grads.grad_input = uncenter(grad_centered);
  return grads;
}

// ---------------------------------------------------------------- pooling

SopForward sop_forward(const DataMatrix& x, const PoolingConfig& config,
                       const BackwardMethod& method) {
  if (!(config.alpha > 0.0)) throw InvalidInputError("sop_forward: alpha must be > 0");
  if (!(config.epsilon > 0.0)) throw InvalidInputError("sop_forward: epsilon must be > 0");
  check_data(x, x.rows(), "sop_forward");
  method.validate();
  SopForward out;
  out.context = spectral_forward(
      x, config.epsilon, config.normalized ? SpectralFn::normalized_power : SpectralFn::power,
      config.alpha, method);
  out.output = out.context.transform * out.context.centered;
  return out;
}

LayerGrads sop_backward(const SpectralContext& context, const DataMatrix& grad_out) {
  return zca_backward(context, grad_out);
}

// --------------------------------------------------------------- grouping

std::vector<DataMatrix> split_feature_groups(const DataMatrix& x, int groups) {
  if (groups < 1 || x.rows() % groups != 0) {
    throw ShapeError("split_feature_groups: " + std::to_string(x.rows()) +
                     " features do not split into " + std::to_string(groups) + " equal groups");
  }
  const Eigen::Index size = x.rows() / groups;
  std::vector<DataMatrix> parts;
  parts.reserve(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) parts.push_back(x.middleRows(g * size, size));
  return parts;
}

DataMatrix merge_feature_groups(const std::vector<DataMatrix>& parts) {
  if (parts.empty()) throw ShapeError("merge_feature_groups: no groups");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts.front().cols()) throw ShapeError("merge_feature_groups: column mismatch");
    rows += p.rows();
  }
  DataMatrix out(rows, parts.front().cols());
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p;
    offset += p.rows();
  }
  return out;
}

GroupedZcaForward grouped_zca_forward_train(const DataMatrix& x, std::vector<ZcaState>& states,
                                            const BackwardMethod& method) {
  const auto parts = split_feature_groups(x, static_cast<int>(states.size()));
  GroupedZcaForward out;
  std::vector<DataMatrix> outputs;
  outputs.reserve(parts.size());
  out.contexts.reserve(parts.size());
  for (std::size_t g = 0; g < parts.size(); ++g) {
    auto fwd = zca_forward_train(parts[g], states[g], method);
    outputs.push_back(std::move(fwd.output));
    out.contexts.push_back(std::move(fwd.context));
  }
  out.output = merge_feature_groups(outputs);
  return out;
}

DataMatrix grouped_zca_backward(const std::vector<SpectralContext>& contexts,
                                const DataMatrix& grad_out) {
  const auto parts = split_feature_groups(grad_out, static_cast<int>(contexts.size()));
  std::vector<DataMatrix> grads;
  grads.reserve(parts.size());
  for (std::size_t g = 0; g < parts.size(); ++g) {
    grads.push_back(zca_backward(contexts[g], parts[g]).grad_input);
  }
  return merge_feature_groups(grads);
}

}  // namespace robeig
