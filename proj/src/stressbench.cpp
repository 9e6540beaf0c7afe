#include "robeig/stressbench.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>

#include "robeig/error.hpp"
#include "robeig/layers.hpp"
#include "robeig/oracle.hpp"
#include "robeig/pi_deflation.hpp"

namespace robeig::bench {

// ------------------------------------------------------------------ naming

Experiment parse_experiment(const std::string& name) {
  if (name == "eigengap") return Experiment::eigengap;
  if (name == "explosion") return Experiment::explosion;
  if (name == "equivalence") return Experiment::equivalence;
  if (name == "residual-surface") return Experiment::residual_surface;
  if (name == "speed") return Experiment::speed;
  throw InvalidInputError("unknown experiment '" + name + "'");
}

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::eigengap: return "eigengap";
    case Experiment::explosion: return "explosion";
    case Experiment::equivalence: return "equivalence";
    case Experiment::residual_surface: return "residual-surface";
    case Experiment::speed: return "speed";
  }
  return "unknown";
}

Distribution parse_distribution(const std::string& name) {
  if (name == "uniform") return Distribution::uniform;
  if (name == "normal") return Distribution::normal;
  throw InvalidInputError("unknown distribution '" + name + "' (uniform|normal)");
}

BatchKind parse_batch_kind(const std::string& name) {
  if (name == "tied") return BatchKind::tied;
  if (name == "random") return BatchKind::random;
  throw InvalidInputError("unknown batch kind '" + name + "' (tied|random)");
}

int default_trials(Experiment e) {
  return e == Experiment::eigengap ? 10000 : 1000;
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw InvalidInputError("trials must be >= 1");
  for (int d : dims) {
    if (d < 1) throw InvalidInputError("every dimension must be >= 1");
  }
  if (experiment == Experiment::eigengap) {
    for (double t : thresholds) {
      if (!(t > 0.0)) throw InvalidInputError("eigengap thresholds must be positive");
    }
  }
  if (experiment == Experiment::explosion && methods.empty()) {
    throw InvalidInputError("explosion needs at least one method");
  }
  for (const auto& m : methods) {
    if (m != "analytic" && m != "taylor" && m != "pi" && m != "clip") {
      throw InvalidInputError("unknown method '" + m + "'");
    }
  }
  if (degree < 0) throw InvalidInputError("K must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidInputError("epsilon must be > 0");
  if (!(clip_threshold > 0.0)) throw InvalidInputError("clip threshold must be > 0");
  if (channels < 0) throw InvalidInputError("channels must be >= 0");
}

// ------------------------------------------------------------- randomness

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t trial) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ trial);
}

DataMatrix random_data(Eigen::Index rows, Eigen::Index cols, Distribution dist, Rng& rng) {
  DataMatrix x(rows, cols);
  if (dist == Distribution::normal) {
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = normal(rng);
  } else {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = uniform(rng);
  }
  return x;
}

Matrix random_orthogonal(Eigen::Index d, Rng& rng) {
  const Matrix g = random_data(d, d, Distribution::normal, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

SymMatrix random_psd(Eigen::Index d, double epsilon, Rng& rng) {
  return covariance(random_data(d, 2 * d, Distribution::normal, rng), epsilon);
}

DataMatrix tied_batch(Eigen::Index d, Eigen::Index n, Rng& rng) {
  if (d < 2 || n < d + 1) throw InvalidInputError("tied_batch: need d >= 2 and n >= d + 1");
  const Matrix u = random_orthogonal(d, rng);

  // Orthonormal sample directions orthogonal to the all-ones vector, so every
  // row of the batch is already centred.
  Matrix basis = random_data(n, d + 1, Distribution::normal, rng);
  basis.col(0).setOnes();
  Eigen::HouseholderQR<Matrix> qr(basis);
  const Matrix q = (qr.householderQ() * Matrix::Identity(n, d + 1)).rightCols(d);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector eig(d);
  for (Eigen::Index i = 0; i < d - 2; ++i) eig(i) = 0.05 * std::pow(100.0, unit(rng));
  const double tie = 0.005 * std::pow(10.0, unit(rng));
  eig(d - 2) = tie;
  eig(d - 1) = tie;
  const Vector sigma = eig.array().sqrt().matrix();
  return u * sigma.asDiagonal() * q.transpose();
}

unsigned worker_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("STRESSBENCH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// -------------------------------------------------------------- eigen-gap

std::vector<EigengapRow> run_eigengap(const ExperimentSpec& spec) {
  spec.validate();
  const unsigned threads = worker_threads(spec.threads);
  std::vector<EigengapRow> out;
  for (int d : spec.dims) {
    std::vector<double> min_gap(static_cast<std::size_t>(spec.trials));
    parallel_for(spec.trials, threads, [&](int t) {
      Rng rng(trial_seed(spec.seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(t)));
      const DataMatrix x = random_data(d, 2 * d, spec.distribution, rng);
      const Vector values = eigenvalues_sym(covariance(x, 0.0));
      double gap = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i + 1 < values.size(); ++i) {
        gap = std::min(gap, values(i) - values(i + 1));
      }
      min_gap[static_cast<std::size_t>(t)] = gap;
    });
    for (double threshold : spec.thresholds) {
      int hits = 0;
      for (double g : min_gap) hits += g < threshold ? 1 : 0;
      const double p = static_cast<double>(hits) / spec.trials;
      const double half = 1.96 * std::sqrt(p * (1.0 - p) / spec.trials);
      out.push_back({d, threshold, spec.trials, hits, p, half});
    }
  }
  return out;
}

// -------------------------------------------------------------- explosion

namespace {

constexpr double kExplosionLimit = 1e10;

bool exploded(const Matrix& m) {
  return !m.allFinite() || m.cwiseAbs().maxCoeff() > kExplosionLimit;
}

BackwardMethod method_from_name(const std::string& name, const ExperimentSpec& spec) {
  if (name == "analytic") return BackwardMethod::analytic(spec.epsilon);
  if (name == "taylor") return BackwardMethod::taylor(spec.degree, spec.epsilon);
  if (name == "pi") return BackwardMethod::pi_deflation(spec.degree + 1, spec.epsilon);
  return BackwardMethod::clip(spec.clip_threshold, spec.epsilon);
}

struct TrialOutcome {
  bool failed = false;
  double max_abs = std::numeric_limits<double>::quiet_NaN();
  double column_angle = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace

std::vector<ExplosionRow> run_explosion(const ExperimentSpec& spec) {
  spec.validate();
  const unsigned threads = worker_threads(spec.threads);
  std::vector<ExplosionRow> out;
  for (int d : spec.dims) {
    if (spec.batches == BatchKind::tied && d < 2) {
      throw InvalidInputError("explosion: tied batches need d >= 2");
    }
    const int n = 2 * d;
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
      const std::string& name = spec.methods[mi];
      const BackwardMethod method = method_from_name(name, spec);
      std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(spec.trials));
      parallel_for(spec.trials, threads, [&](int t) {
        // Same batches for every method: the stream ignores the method.
        Rng rng(trial_seed(spec.seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(t)));
        const DataMatrix x = spec.batches == BatchKind::tied
                                 ? tied_batch(d, n, rng)
                                 : random_data(d, n, Distribution::normal, rng);
        const DataMatrix grad_out = random_data(d, n, Distribution::normal, rng);

        LayerGrads grads;
        TrialOutcome outcome;
        if (name == "pi") {
          ZcaState state(d, ZcaState::Running::subspace, spec.epsilon);
          PiConfig config;
          config.iterations = spec.degree + 1;
          auto fwd = zca_pi_forward_train(x, state, config);
          grads = zca_pi_backward(fwd.context, grad_out);
        } else {
          ZcaState state(d, ZcaState::Running::covariance, spec.epsilon);
          auto fwd = zca_forward_train(x, state, method);
          grads = zca_backward(fwd.context, grad_out);
          if (spec.batches == BatchKind::tied && name != "analytic") {
            const Vector& lam = fwd.context.decomp.values;
            const Eigen::Index col = d - 1;  // the lower member of the tied pair
            const Vector truth = ktilde_analytic(lam).entries.col(col);
            const Vector approx = build_kmatrix(lam, method).entries.col(col);
            outcome.column_angle = oracle::direction_angle_degrees(truth, approx);
          } else if (spec.batches == BatchKind::tied) {
            outcome.column_angle = 0.0;
          }
        }
        outcome.failed = exploded(grads.grad_cov) || exploded(grads.grad_input);
        if (!outcome.failed) outcome.max_abs = grads.grad_cov.cwiseAbs().maxCoeff();
        outcomes[static_cast<std::size_t>(t)] = outcome;
      });

      int failures = 0;
      double grad_sum = 0.0;
      int grad_count = 0;
      double angle_sum = 0.0;
      int angle_count = 0;
      for (const auto& o : outcomes) {
        if (o.failed) {
          ++failures;
        } else {
          grad_sum += o.max_abs;
          ++grad_count;
        }
        if (!std::isnan(o.column_angle)) {
          angle_sum += o.column_angle;
          ++angle_count;
        }
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.push_back({d, name, spec.trials, failures,
                     static_cast<double>(failures) / spec.trials,
                     grad_count ? grad_sum / grad_count : nan,
                     angle_count ? angle_sum / angle_count : nan});
    }
  }
  return out;
}

// ------------------------------------------------------------ equivalence

std::vector<EquivalenceRow> run_equivalence(const ExperimentSpec& spec) {
  spec.validate();
  const unsigned threads = worker_threads(spec.threads);
  std::vector<EquivalenceRow> out;
  for (int d : spec.dims) {
    std::vector<std::vector<EquivalenceRow>> per_trial(static_cast<std::size_t>(spec.trials));
    parallel_for(spec.trials, threads, [&](int t) {
      Rng rng(trial_seed(spec.seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(t)));
      const SymMatrix m = random_psd(d, spec.epsilon, rng);
      EigenDecomp decomp = eig_sym(m);
      decomp.values = clamp_eigenvalues(decomp.values, spec.epsilon);
      const Matrix seed = random_data(d, d, Distribution::normal, rng);

      const KMatrix k = ktilde_taylor(decomp.values, spec.degree, spec.epsilon);
      const DeflationState state = deflate(m, decomp, BreakConfig::disabled(), spec.degree + 1);
      auto& rows = per_trial[static_cast<std::size_t>(t)];
      for (int i = 0; i < d; ++i) {
        const Matrix taylor = eigvec_gradient_term(decomp, k, i, seed.col(i));
        const Matrix pi = pi_eigvec_gradient_term(state.matrices[static_cast<std::size_t>(i)],
                                                  state.vectors.col(i), seed.col(i),
                                                  spec.degree + 1);
        const double scale = taylor.norm();
        const double gap = scale > 0.0 ? (taylor - pi).norm() / scale : (taylor - pi).norm();
        rows.push_back({d, t, i + 1, gap, state.report.rayleigh_reldev[static_cast<std::size_t>(i)]});
      }
    });
    for (auto& rows : per_trial) out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

// ------------------------------------------------------- residual surface

std::vector<ResidualRow> run_residual_surface(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<ResidualRow> out;
  const int k = spec.degree;
  const double q3_extreme = 1.0 - 1e-6;
  const std::pair<double, double> fixed[] = {
      {0.5, 0.5}, {0.01, 0.01}, {q3_extreme + 1e-10, q3_extreme}};
  for (const auto& [q2, q3] : fixed) {
    out.push_back({q2, q3, k, oracle::angular_residual(q2, q3, k)});
  }
  constexpr int kSteps = 50;
  for (int a = 1; a <= kSteps; ++a) {
    const double q2 = static_cast<double>(a) / kSteps;
    for (int b = 1; b <= a; ++b) {
      const double q3 = static_cast<double>(b) / kSteps;
      out.push_back({q2, q3, k, oracle::angular_residual(q2, q3, k)});
    }
  }
  return out;
}

// ------------------------------------------------------------------ speed

namespace {

struct SpeedProblem {
  SymMatrix m;
  EigenDecomp decomp;
  GradSeed seed;
  DeflationState deflation;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<SpeedRow> run_speed(const ExperimentSpec& spec) {
  spec.validate();
  using Clock = std::chrono::steady_clock;
  std::vector<SpeedRow> out;
  for (int d : spec.dims) {
    int groups = 1;
    if (spec.channels > 0) {
      if (spec.channels % d != 0) {
        throw InvalidInputError("speed: channels must be a multiple of every dimension");
      }
      groups = spec.channels / d;
    }
    std::vector<std::vector<double>> times(spec.methods.size());
    for (int t = 0; t < spec.trials; ++t) {
      Rng rng(trial_seed(spec.seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(t)));
      std::vector<SpeedProblem> problems;
      problems.reserve(static_cast<std::size_t>(groups));
      for (int g = 0; g < groups; ++g) {
        SpeedProblem p{random_psd(d, spec.epsilon, rng), {}, {}, {}};
        p.decomp = eig_sym(p.m);
        p.decomp.values = clamp_eigenvalues(p.decomp.values, spec.epsilon);
        p.seed = GradSeed{random_data(d, d, Distribution::normal, rng),
                          random_data(d, 1, Distribution::normal, rng).col(0)};
        p.deflation = deflate(p.m, p.decomp, BreakConfig::disabled());
        problems.push_back(std::move(p));
      }
      // Forward work (eigendecomposition, deflation) is excluded; only the
      // backward call is on the clock.
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        const std::string& name = spec.methods[mi];
        const BackwardMethod method = method_from_name(name, spec);
        double sink = 0.0;
        const auto start = Clock::now();
        for (const auto& p : problems) {
          if (name == "pi") {
            sink += pi_backward(p.deflation, p.seed, spec.degree + 1)(0, 0);
          } else {
            sink += backward_eig(p.decomp, p.seed, method).grad(0, 0);
          }
        }
        const auto stop = Clock::now();
        // Keeps the optimiser from discarding the gradient computation.
        if (sink == 1.2345e300) throw Error("unreachable");
        times[mi].push_back(std::chrono::duration<double>(stop - start).count());
      }
    }
    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
      out.push_back({d, spec.methods[mi], median(times[mi]), spec.trials});
    }
  }
  return out;
}

// -------------------------------------------------------------------- CSV

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::string num(double v) { return format_number(v); }
std::string num(int v) { return std::to_string(v); }

}  // namespace

CsvTable to_csv(const std::vector<EigengapRow>& rows) {
  CsvTable t{{"dim", "threshold", "trials", "hits", "probability", "ci_halfwidth"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({num(r.dim), num(r.threshold), num(r.trials), num(r.hits),
                      num(r.probability), num(r.ci_halfwidth)});
  }
  return t;
}

CsvTable to_csv(const std::vector<ExplosionRow>& rows) {
  CsvTable t{{"dim", "method", "trials", "failures", "failure_rate", "mean_max_abs_grad"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({num(r.dim), r.method, num(r.trials), num(r.failures), num(r.failure_rate),
                      num(r.mean_max_abs_grad)});
  }
  return t;
}

CsvTable to_csv(const std::vector<EquivalenceRow>& rows) {
  CsvTable t{{"dim", "trial", "rank", "taylor_pi_gap", "rayleigh_reldev"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({num(r.dim), num(r.trial), num(r.rank), num(r.taylor_pi_gap),
                      num(r.rayleigh_reldev)});
  }
  return t;
}

CsvTable to_csv(const std::vector<ResidualRow>& rows) {
  CsvTable t{{"q2", "q3", "K", "rho_degrees"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({num(r.q2), num(r.q3), num(r.degree), num(r.rho_degrees)});
  }
  return t;
}

CsvTable to_csv(const std::vector<SpeedRow>& rows) {
  CsvTable t{{"dim", "method", "median_backward_seconds", "trials"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({num(r.dim), r.method, num(r.median_backward_seconds), num(r.trials)});
  }
  return t;
}

CsvTable run_experiment(const ExperimentSpec& spec) {
  switch (spec.experiment) {
    case Experiment::eigengap: return to_csv(run_eigengap(spec));
    case Experiment::explosion: return to_csv(run_explosion(spec));
    case Experiment::equivalence: return to_csv(run_equivalence(spec));
    case Experiment::residual_surface: return to_csv(run_residual_surface(spec));
    case Experiment::speed: return to_csv(run_speed(spec));
  }
  throw InvalidInputError("unknown experiment");
}

void write_csv(std::ostream& out, const CsvTable& table) {
  const auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

}  // namespace robeig::bench
