#pragma once

// Data-driven experiment: sample disturbance trajectories from a Gaussian, estimate the
// second moment, synthesize MRO and DRO controllers over a radius grid and score them by
// their exact expected cost under the true distribution.

#include <drc/sdp_synthesis.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace drc {

inline constexpr const char* kToolVersion = "0.1.0";

/// Quantile convention used by summarize(); recorded in result metadata.
inline constexpr const char* kQuantileRule =
    "linear interpolation between order statistics, h = (n - 1) p (inclusive)";

struct ExperimentConfig {
  LtvSystem<double> system;
  CostSpec<double> cost;
  Eigen::VectorXd mu;     // true mean over the stacked disturbance
  Eigen::MatrixXd Sigma;  // true covariance
  int samples = 50;
  int trials = 100;
  std::vector<double> radii;
  std::uint64_t seed = 0;
  double jitter = 1e-8;
  SolverOpts solver;
  int threads = 1;

  /// Scalar random walk x_{t+1} = x_t + u_t + w_t with Q = R = I, w ~ N(mean 1, I) where 1 is the all-ones vector.
  static ExperimentConfig random_walk(double mean = 0.0, int horizon = 10);

  void validate() const;
};

/// `count` evenly spaced points from lo to hi inclusive.
std::vector<double> uniform_grid(double lo, double hi, int count);

/// SplitMix64 mix of the master seed and the trial index.
std::uint64_t trial_seed(std::uint64_t master, int trial);

/// Nx x N matrix whose columns are draws from N(mu, Sigma).
Eigen::MatrixXd sample_disturbances(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, int N,
                                    std::uint64_t seed);

struct MomentEstimate {
  Eigen::MatrixXd M0;
  bool jittered = false;
};

/// (1/N) sum w_i w_i^T over the columns of `samples`, plus jitter I when lambda_min <= jitter.
MomentEstimate empirical_second_moment(const Eigen::MatrixXd& samples, double jitter = 1e-8);

/// E[J] = tr((C_K + N)(Sigma + mu mu^T)).
double exact_expected_cost(const Gain& K, const Dynamics& sd, const Eigen::VectorXd& mu,
                           const Eigen::MatrixXd& Sigma);

struct CellRecord {
  int trial = 0;
  int radius_index = 0;
  double radius = 0.0;
  Method method = Method::Mro;
  Gain K;
  SolveStatus status = SolveStatus::Optimal;
  double objective = 0.0;        // value reported by the synthesis step
  double worst_case_value = 0.0;  // regret (MRO) or cost (DRO) of K over the ball, by the dual
  double gamma = 0.0;
  double expected_cost = 0.0;  // exact, under the true distribution
  bool skipped = false;        // excluded from aggregates (Error / Infeasible / exception)
  std::string message;
};

struct TrialInfo {
  std::uint64_t seed = 0;
  bool jittered = false;
};

struct ExperimentResult {
  std::vector<double> radii;
  std::vector<TrialInfo> trials;
  std::vector<CellRecord> cells;  // trial-major, then radius, then method (MRO, DRO)
  double cost_floor = 0.0;        // tr(N (Sigma + mu mu^T))
  int skipped = 0;
  int inaccurate = 0;
};

ExperimentResult run_radius_sweep(const ExperimentConfig& cfg);

struct SummaryRow {
  double radius = 0.0;
  Method method = Method::Mro;
  double mean = 0.0;
  double q20 = 0.0;
  double q80 = 0.0;
  int count = 0;
  int skipped = 0;
};

/// Quantile of ascending-sorted values under kQuantileRule.
double quantile(const std::vector<double>& sorted, double p);

/// Per (radius, method): mean and 20/80 quantiles of the expected cost over non-skipped cells.
std::vector<SummaryRow> summarize(const ExperimentResult& res);

}  // namespace drc
