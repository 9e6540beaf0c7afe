#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "robeig/grad_core.hpp"
#include "robeig/sym_eig.hpp"

namespace robeig::bench {

enum class Experiment { eigengap, explosion, equivalence, residual_surface, speed };

/// Entry distribution of the random data matrices.
enum class Distribution { uniform, normal };

/// Batches fed to the explosion harness.
enum class BatchKind { tied, random };

Experiment parse_experiment(const std::string& name);
const char* to_string(Experiment e);
Distribution parse_distribution(const std::string& name);
BatchKind parse_batch_kind(const std::string& name);

struct ExperimentSpec {
  Experiment experiment = Experiment::eigengap;
  std::vector<int> dims;
  std::vector<double> thresholds;
  int trials = 1000;
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"analytic", "taylor", "pi", "clip"};
  int degree = kDefaultTaylorDegree;
  double epsilon = kDefaultEpsilon;
  double clip_threshold = 100.0;
  Distribution distribution = Distribution::uniform;
  BatchKind batches = BatchKind::tied;
  /// Speed only: when > 0 every trial processes channels / d independent
  /// d x d problems and reports their total time.
  int channels = 0;
  /// 0 = STRESSBENCH_THREADS or hardware concurrency.
  unsigned threads = 0;

  /// InvalidInputError on out-of-range fields.
  void validate() const;
};

/// Default trial count per experiment (10 000 for the eigen-gap study).
int default_trials(Experiment e);

// ------------------------------------------------------------- result rows

struct EigengapRow {
  int dim;
  double threshold;
  int trials;
  int hits;
  double probability;
  double ci_halfwidth;  ///< 95% normal-approximation binomial half-width
};

struct ExplosionRow {
  int dim;
  std::string method;
  int trials;
  int failures;
  double failure_rate;
  double mean_max_abs_grad;  ///< over trials whose gradients stayed finite
  /// Tied batches, K-matrix methods: mean angle between the tied column of
  /// the method's K-matrix and the analytic one. NaN otherwise.
  double mean_column_angle_deg;
};

struct EquivalenceRow {
  int dim;
  int trial;
  int rank;  ///< 1-based eigenvector index
  double taylor_pi_gap;
  double rayleigh_reldev;
};

struct ResidualRow {
  double q2;
  double q3;
  int degree;
  double rho_degrees;
};

struct SpeedRow {
  int dim;
  std::string method;
  double median_backward_seconds;
  int trials;
};

std::vector<EigengapRow> run_eigengap(const ExperimentSpec& spec);
std::vector<ExplosionRow> run_explosion(const ExperimentSpec& spec);
std::vector<EquivalenceRow> run_equivalence(const ExperimentSpec& spec);
std::vector<ResidualRow> run_residual_surface(const ExperimentSpec& spec);
std::vector<SpeedRow> run_speed(const ExperimentSpec& spec);

// -------------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable to_csv(const std::vector<EigengapRow>& rows);
CsvTable to_csv(const std::vector<ExplosionRow>& rows);
CsvTable to_csv(const std::vector<EquivalenceRow>& rows);
CsvTable to_csv(const std::vector<ResidualRow>& rows);
CsvTable to_csv(const std::vector<SpeedRow>& rows);

/// Runs the experiment named in spec and returns its table.
CsvTable run_experiment(const ExperimentSpec& spec);

void write_csv(std::ostream& out, const CsvTable& table);

/// Shortest round-trip decimal form ("inf", "nan" for non-finite values).
std::string format_number(double value);

// ------------------------------------------ reproducible randomness, threads

/// Seed of trial `trial` in stream `stream`; a pure function of its inputs,
/// so trial t sees the same numbers whatever order trials run in.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t trial);

using Rng = std::mt19937_64;

DataMatrix random_data(Eigen::Index rows, Eigen::Index cols, Distribution dist, Rng& rng);

/// Haar-distributed orthogonal matrix.
Matrix random_orthogonal(Eigen::Index d, Rng& rng);

/// Covariance of a d x 2d standard-normal draw, plus epsilon I.
SymMatrix random_psd(Eigen::Index d, double epsilon, Rng& rng);

/// d x n centred batch whose scatter matrix has exactly one repeated
/// eigenvalue pair at the bottom of the spectrum (value in [0.005, 0.05]);
/// the other d - 2 eigenvalues are log-uniform in [0.05, 5].
DataMatrix tied_batch(Eigen::Index d, Eigen::Index n, Rng& rng);

/// STRESSBENCH_THREADS if set, else hardware concurrency; clamps to >= 1.
unsigned worker_threads(unsigned requested = 0);

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any body is rethrown on the calling thread.
template <class Body>
void parallel_for(int count, unsigned threads, Body&& body) {
  if (count <= 0) return;
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace robeig::bench
