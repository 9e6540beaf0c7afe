// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "robeig/error.hpp"
#include "robeig/grad_core.hpp"
#include "robeig/layers.hpp"
#include "robeig/oracle.hpp"
#include "robeig/pi_deflation.hpp"
#include "robeig/stressbench.hpp"

using namespace robeig;
using namespace robeig::bench;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vector random_unit(Eigen::Index d, Rng& rng) {
  Vector g = bench::random_data(d, 1, Distribution::normal, rng).col(0);
  return g / g.norm();
}

// 1 ------------------------------------------------------------------------
Outcome reference_taylor_matrix() {
  const KMatrix k = ktilde_taylor(vec({0.02, 0.01, 0.01}), 9, 0.01);
  Matrix want(3, 3);
  want << 0, 99.90, 99.90, 99.90, 0, 1000, 99.90, 1000, 0;
  const double err = (k.entries.cwiseAbs() - want).cwiseAbs().maxCoeff();
  return {err <= 0.005, fmt("max |err| = %.3g (tol 0.005)", err)};
}

// 2 ------------------------------------------------------------------------
Outcome angular_residual_extremes() {
  const double a = oracle::angular_residual(0.5, 0.5, 9);
  const double b = oracle::angular_residual(0.01, 0.01, 9);
  const double q3 = 1.0 - 1e-6;
  const double c = oracle::angular_residual(q3 + 1e-10, q3, 9);
  const bool ok = std::abs(a + 5.71) <= 0.01 && std::abs(b + 0.06) <= 0.01 &&
                  std::abs(c + 44.99) <= 0.05;
  return {ok, fmt("rho = %.4f, %.4f, %.4f deg", a, b, c)};
}

// 3 ------------------------------------------------------------------------
Outcome clipping_direction_error() {
  const Vector lam = vec({0.02, 0.01, 0.01});
  const Vector truth = ktilde_analytic(lam).entries.col(2);
  const double clip = oracle::direction_angle_degrees(truth, ktilde_clip(lam, 100).entries.col(2));
  const double taylor =
      oracle::direction_angle_degrees(truth, ktilde_taylor(lam, 9, 0.01).entries.col(2));
  const bool ok = std::abs(clip - 45.0) <= 0.1 && taylor <= 5.71;
  return {ok, fmt("clip %.4f deg (45 +- 0.1), taylor %.4f deg (<= 5.71)", clip, taylor)};
}

// 4 ------------------------------------------------------------------------
Outcome gradient_bound_holds() {
  const int d = 64, K = 9, trials = 1000;
  const double eps = 0.01;
  const double bound = gradient_bound(d, K, eps, 1.0);
  int violations = 0, tied_spectra = 0;
  double worst = 0.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    Rng rng(trial_seed(4, d, static_cast<std::uint64_t>(t)));
    Vector lam(d);
    switch (t % 4) {
      case 0:  // clamped tail: many exact ties at epsilon
        for (auto& x : lam) x = std::max(eps, 2.0 * u(rng) - 0.5);
        break;
      case 1:  // fully flat spectrum
        lam.setConstant(eps);
        break;
      case 2:  // clusters of exact ties
        for (Eigen::Index i = 0; i < d; ++i) lam(i) = eps + 0.1 * static_cast<double>(i / 8) * u(rng);
        for (Eigen::Index i = 0; i < d; i += 8) lam.segment(i, 8).setConstant(lam(i));
        break;
      default:  // log-uniform with duplicated pairs
        for (auto& x : lam) x = eps * std::pow(10.0, 3.0 * u(rng));
        for (Eigen::Index i = 0; i + 1 < d; i += 5) lam(i + 1) = lam(i);
        break;
    }
    std::sort(lam.data(), lam.data() + d, std::greater<>());
    bool tie = false;
    for (Eigen::Index i = 0; i + 1 < d; ++i) tie = tie || lam(i) == lam(i + 1);
    tied_spectra += tie ? 1 : 0;
    const EigenDecomp e{random_orthogonal(d, rng), lam};
    const KMatrix k = ktilde_taylor(lam, K, eps);
    for (int i = 0; i < d; ++i) {
      const double norm = eigvec_gradient_term(e, k, i, random_unit(d, rng)).norm();
      worst = std::max(worst, norm);
      if (!(norm <= bound)) ++violations;
    }
  }
  return {violations == 0 && tied_spectra == trials,
          fmt("%g violations over %g terms; max norm %.4g <= bound %.0f", violations,
              static_cast<double>(trials) * d, worst, bound)};
}

// 5 ------------------------------------------------------------------------
Outcome taylor_pi_equivalence() {
  const int trials = 300;
  double worst = 0.0;
  int count = 0;
  for (int d : {4, 8, 16}) {
    for (int K : {1, 5, 9}) {
      for (int t = 0; t < trials; ++t) {
        Rng rng(trial_seed(5, static_cast<std::uint64_t>(d * 100 + K), static_cast<std::uint64_t>(t)));
        const SymMatrix m = random_psd(d, 0.01, rng);
        const EigenDecomp e = eig_sym(m);
        const Vector g = random_unit(d, rng);
        const Matrix taylor = eigvec_gradient_term(e, ktilde_taylor(e.values, K, 1e-3), 0, g);
        const Matrix pi = pi_eigvec_gradient_term(m.entries(), e.vectors.col(0), g, K + 1);
        worst = std::max(worst, (taylor - pi).norm() / taylor.norm());
        ++count;
      }
    }
  }
  return {worst <= 1e-10, fmt("max relative gap %.3g over %g matrices (tol 1e-10)", worst, count)};
}

// 6 ------------------------------------------------------------------------
Outcome finite_difference_agreement() {
  const int d = 5, wanted = 50;
  int used = 0, drawn = 0;
  double worst[4] = {0, 0, 0, 0};
  while (used < wanted) {
    Rng rng(trial_seed(6, d, static_cast<std::uint64_t>(drawn++)));
    const SymMatrix m = random_psd(d, 0.0, rng);
    const EigenDecomp base = eig_sym(m);
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < d; ++i) gap = std::min(gap, base.values(i) - base.values(i + 1));
    if (gap < 1e-2) continue;
    ++used;
    const Matrix w = bench::random_data(d, d, Distribution::normal, rng);

    // Eigenvectors oriented against the unperturbed basis so the loss is
    // smooth under the finite-difference probes.
    auto aligned = [&](const SymMatrix& p) {
      EigenDecomp e = eig_sym(p);
      for (int j = 0; j < d; ++j) {
        if (e.vectors.col(j).dot(base.vectors.col(j)) < 0) e.vectors.col(j) *= -1.0;
      }
      return e;
    };
    struct Case {
      oracle::SymLoss loss;
      GradSeed seed;
    };
    const Case cases[4] = {
        {[](const SymMatrix& p) { return eig_sym(p).values.sum(); },
         GradSeed{Matrix::Zero(d, d), Vector::Ones(d)}},
        {[&](const SymMatrix& p) { return aligned(p).vectors.squaredNorm(); },
         GradSeed{2.0 * base.vectors, Vector::Zero(d)}},
        {[](const SymMatrix& p) { return eig_sym(p).values.squaredNorm(); },
         GradSeed{Matrix::Zero(d, d), 2.0 * base.values}},
        {[&](const SymMatrix& p) { return aligned(p).vectors.cwiseProduct(w).sum(); },
         GradSeed{w, Vector::Zero(d)}},
    };
    for (int c = 0; c < 4; ++c) {
      const Matrix g = symmetric_part(backward_eig(base, cases[c].seed, BackwardMethod::analytic()).grad);
      const Matrix fd = oracle::finite_diff_grad(cases[c].loss, m);
      worst[c] = std::max(worst[c], (g - fd).norm() / std::max(1.0, fd.norm()));
    }
  }
  const double all = *std::max_element(worst, worst + 4);
  return {all <= 1e-5, fmt("rel err trace %.2g, |V|^2 %.2g, sum l^2 %.2g", worst[0], worst[1],
                           worst[2]) +
                           fmt(", <W,V> %.2g (tol 1e-5)", worst[3])};
}

// 7 ------------------------------------------------------------------------
Outcome zca_correctness() {
  const double eps = 1e-6;
  double worst = 0.0, identity_err = 0.0;
  for (int d : {4, 8, 16, 32, 64}) {
    for (int t = 0; t < 5; ++t) {
      Rng rng(trial_seed(7, d, static_cast<std::uint64_t>(t)));
      const DataMatrix x = bench::random_data(d, 8 * d, Distribution::normal, rng);
      ZcaState state(d, ZcaState::Running::covariance, eps);
      const ZcaForward f = zca_forward_train(x, state, BackwardMethod::taylor(9, eps));
      if (f.context.clamped.any()) throw Error("clamp activated");
      const DataMatrix c = center_rows(f.output);
      const Matrix cov = c * c.transpose();
      const Matrix id = Matrix::Identity(d, d);
      worst = std::max(worst, (cov - id).cwiseAbs().maxCoeff());
      // The residual is exactly -eps S^2 from the ridge in M.
      const Matrix s = f.context.transform;
      identity_err = std::max(identity_err, (cov - (id - eps * s * s)).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-6 && identity_err <= 1e-12,
          fmt("max |cov - I| %.3g (tol 1e-6), |cov - (I - eps S^2)| %.2g", worst, identity_err)};
}

// 8 ------------------------------------------------------------------------
Outcome explosion_rates() {
  ExperimentSpec s;
  s.experiment = Experiment::explosion;
  s.dims = {32};
  s.trials = 1000;
  s.seed = 8;
  const auto rows = run_explosion(s);
  double analytic = -1, taylor = -1, clip = -1, pi = -1, taylor_angle = 0, clip_angle = 0;
  for (const auto& r : rows) {
    if (r.method == "analytic") analytic = r.failure_rate;
    if (r.method == "taylor") {
      taylor = r.failure_rate;
      taylor_angle = r.mean_column_angle_deg;
    }
    if (r.method == "clip") {
      clip = r.failure_rate;
      clip_angle = r.mean_column_angle_deg;
    }
    if (r.method == "pi") pi = r.failure_rate;
  }
  const bool ok = analytic == 1.0 && taylor == 0.0 && clip == 0.0;
  return {ok, fmt("failure rate analytic %.3f, taylor %.3f, clip %.3f", analytic, taylor, clip) +
                  fmt(" (pi %.3f); tied-column angle taylor %.2f vs clip %.2f deg", pi,
                      taylor_angle, clip_angle)};
}

// 9 ------------------------------------------------------------------------
Outcome eigengap_point_check() {
  ExperimentSpec s;
  s.experiment = Experiment::eigengap;
  s.dims = {6, 50, 150, 300};
  s.thresholds = {std::pow(2.0, -10)};
  s.trials = 10000;
  s.seed = 9;
  const auto rows = run_eigengap(s);
  double p150 = 0.0;
  bool monotone = true;
  std::string probs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim == 150) p150 = rows[i].probability;
    if (i > 0 && rows[i].probability + rows[i].ci_halfwidth <
                     rows[i - 1].probability - rows[i - 1].ci_halfwidth) {
      monotone = false;
    }
    probs += (i ? ", " : "") + std::to_string(rows[i].dim) + ":" + format_number(rows[i].probability);
  }
  return {p150 > 0.001 && monotone,
          "p(d=150) " + format_number(p150) + " (> 0.001); monotone within CI: " +
              (monotone ? "yes" : "no") + " [" + probs + "]"};
}

// 10 -----------------------------------------------------------------------
Outcome backward_speed_ordering() {
  ExperimentSpec s;
  s.experiment = Experiment::speed;
  s.dims = {16, 32, 64};
  s.trials = 1000;
  s.methods = {"taylor", "pi"};
  s.seed = 10;
  const auto rows = run_speed(s);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const double t = rows[i].median_backward_seconds, p = rows[i + 1].median_backward_seconds;
    ok = ok && t <= p;
    detail += fmt("d=%g taylor %.3gus pi %.3gus; ", rows[i].dim, t * 1e6, p * 1e6);
  }
  return {ok, detail};
}

// 11 -----------------------------------------------------------------------
Outcome deflation_roundoff() {
  const int d = 16, trials = 500;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> first, middle, first_w, middle_w;
  for (int t = 0; t < trials; ++t) {
    Rng rng(trial_seed(11, d, static_cast<std::uint64_t>(t)));
    // Spectrum spread over four decades, Haar eigenvectors.
    Vector lam(d);
    for (auto& x : lam) x = std::pow(10.0, 4.0 * u(rng) - 2.0);
    const Matrix q = random_orthogonal(d, rng);
    const SymMatrix m(q * lam.asDiagonal() * q.transpose());
    const DeflationState st = deflate(m, eig_sym(m), BreakConfig::disabled(), 10);
    first.push_back(st.report.rayleigh_reldev[0]);
    middle.push_back(st.report.rayleigh_reldev[d / 2 - 1]);

    const SymMatrix w = random_psd(d, 0.01, rng);
    const DeflationState sw = deflate(w, eig_sym(w), BreakConfig::disabled(), 10);
    first_w.push_back(sw.report.rayleigh_reldev[0]);
    middle_w.push_back(sw.report.rayleigh_reldev[d / 2 - 1]);
  }
  const double a = median(first), b = median(middle);
  return {b > a, fmt("median reldev rank 1 %.3g, rank d/2 %.3g", a, b) +
                     fmt(" (Wishart spectra: %.3g vs %.3g)", median(first_w), median(middle_w))};
}

// 12 -----------------------------------------------------------------------
Outcome epsilon_invariance() {
  const int d = 8;
  double vec_err = 0.0, val_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    Rng rng(trial_seed(12, d, static_cast<std::uint64_t>(t)));
    const SymMatrix m = random_psd(d, 0.0, rng);
    const SymMatrix shifted(m.entries() + 0.01 * Matrix::Identity(d, d));
    const EigenDecomp a = eig_sym(m), b = eig_sym(shifted);
    val_err = std::max(val_err, (b.values - a.values - 0.01 * Vector::Ones(d)).cwiseAbs().maxCoeff());
    for (int j = 0; j < d; ++j) {
      const double s = a.vectors.col(j).dot(b.vectors.col(j)) < 0 ? -1.0 : 1.0;
      vec_err = std::max(vec_err, (a.vectors.col(j) - s * b.vectors.col(j)).cwiseAbs().maxCoeff());
    }
  }
  return {vec_err <= 1e-8 && val_err <= 1e-9,
          fmt("max vector diff %.3g (tol 1e-8), eigenvalue shift error %.3g (tol 1e-9)", vec_err,
              val_err)};
}

}  // namespace

int main() {
  report(1, "reference-taylor-matrix", reference_taylor_matrix);
  report(2, "angular-residual-extremes", angular_residual_extremes);
  report(3, "clipping-direction-error", clipping_direction_error);
  report(4, "gradient-bound", gradient_bound_holds);
  report(5, "taylor-pi-equivalence", taylor_pi_equivalence);
  report(6, "finite-difference", finite_difference_agreement);
  report(7, "zca-whitening", zca_correctness);
  report(8, "explosion-rates", explosion_rates);
  report(9, "eigengap-fig1a", eigengap_point_check);
  report(10, "backward-speed", backward_speed_ordering);
  report(11, "deflation-roundoff", deflation_roundoff);
  report(12, "epsilon-invariance", epsilon_invariance);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
