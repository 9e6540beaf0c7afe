// stressbench: CSV experiments for the robust eigendecomposition backward.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robeig/error.hpp"
#include "robeig/stressbench.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Accepts plain floats and the 2^-10 power form.
double parse_threshold(const std::string& text) {
  std::size_t used = 0;
  const auto caret = text.find('^');
  try {
    if (caret != std::string::npos) {
      const double base = std::stod(text.substr(0, caret), &used);
      if (used != caret) throw std::invalid_argument(text);
      const std::string exp_text = text.substr(caret + 1);
      const double exponent = std::stod(exp_text, &used);
      if (used != exp_text.size()) throw std::invalid_argument(text);
      return std::pow(base, exponent);
    }
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::logic_error&) {
    throw robeig::InvalidInputError("bad threshold '" + text + "'");
  }
}

int parse_dim(const std::string& text) {
  std::size_t used = 0;
  try {
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw robeig::InvalidInputError("bad dimension '" + text + "'");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace robeig::bench;

  CLI::App app{"Stress experiments for differentiable eigendecomposition"};
  std::string experiment;
  std::string dims_text;
  std::string thresholds_text = "2^-10";
  int trials = 0;
  std::uint64_t seed = 0;
  std::string methods_text = "analytic,taylor,pi,clip";
  int degree = 9;
  double epsilon = 0.01;
  double clip_threshold = 100.0;
  std::string out_path;
  std::string distribution = "uniform";
  std::string batches = "tied";
  int channels = 0;
  unsigned threads = 0;

  app.add_option("experiment", experiment,
                 "eigengap | explosion | equivalence | residual-surface | speed")
      ->required();
  app.add_option("--dims", dims_text, "comma-separated dimensions");
  app.add_option("--thresholds", thresholds_text, "comma-separated gap thresholds (2^-10 form ok)");
  app.add_option("--trials", trials, "trials per configuration (default depends on experiment)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--methods", methods_text, "subset of analytic,taylor,pi,clip");
  app.add_option("--K", degree, "Taylor degree; PI uses K+1 iterations");
  app.add_option("--epsilon", epsilon, "eigenvalue clamp / diagonal ridge");
  app.add_option("--clip-threshold", clip_threshold, "clip method threshold");
  app.add_option("--out", out_path, "output CSV path (default stdout)");
  app.add_option("--distribution", distribution, "eigengap data entries: uniform | normal");
  app.add_option("--batches", batches, "explosion batches: tied | random");
  app.add_option("--channels", channels, "speed: total channels split into groups of each dim");
  app.add_option("--threads", threads, "worker threads (default STRESSBENCH_THREADS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ExperimentSpec spec;
    spec.experiment = parse_experiment(experiment);
    if (dims_text.empty()) {
      switch (spec.experiment) {
        case Experiment::eigengap: dims_text = "6,50,150,300"; break;
        case Experiment::explosion: dims_text = "32"; break;
        case Experiment::equivalence: dims_text = "4,8,16"; break;
        case Experiment::speed: dims_text = "16,32,64"; break;
        case Experiment::residual_surface: break;
      }
    }
    for (const auto& d : split_list(dims_text)) spec.dims.push_back(parse_dim(d));
    for (const auto& t : split_list(thresholds_text)) spec.thresholds.push_back(parse_threshold(t));
    spec.trials = trials > 0 ? trials : default_trials(spec.experiment);
    if (trials < 0) throw robeig::InvalidInputError("trials must be >= 1");
    spec.seed = seed;
    spec.methods = split_list(methods_text);
    spec.degree = degree;
    spec.epsilon = epsilon;
    spec.clip_threshold = clip_threshold;
    spec.distribution = parse_distribution(distribution);
    spec.batches = parse_batch_kind(batches);
    spec.channels = channels;
    spec.threads = threads;

    const CsvTable table = run_experiment(spec);
    if (out_path.empty()) {
      write_csv(std::cout, table);
    } else {
      std::ofstream out(out_path);
      if (!out) throw robeig::Error("cannot open '" + out_path + "' for writing");
      write_csv(out, table);
      out.close();
      if (!out) throw robeig::Error("write to '" + out_path + "' failed");
    }
  } catch (const std::exception& e) {
    std::cerr << "stressbench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
