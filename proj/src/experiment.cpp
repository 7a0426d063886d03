#include <drc/experiment.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace drc {

ExperimentConfig ExperimentConfig::random_walk(double mean, int horizon) {
  ExperimentConfig cfg;
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  cfg.system = LtvSystem<double>::time_invariant(one, one, horizon);
  cfg.cost = CostSpec<double>::identity(cfg.system.state_dim(), cfg.system.input_dim());
  const int nx = cfg.system.state_dim();
  cfg.mu = Eigen::VectorXd::Constant(nx, mean);
  cfg.Sigma = Eigen::MatrixXd::Identity(nx, nx);
  cfg.radii = uniform_grid(0.0, 3.0, 31);
  return cfg;
}

void ExperimentConfig::validate() const {
  system.validate();
  const int nx = system.state_dim();
  cost.validate(nx, system.input_dim());
  if (mu.size() != nx) throw Error(ErrorCode::DimensionMismatch, "mean must have length Nx");
  require_square(Sigma, nx, "covariance");
  if (!is_psd(Sigma)) throw Error(ErrorCode::NotPSD, "covariance must be positive semidefinite");
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  if (radii.empty()) throw Error(ErrorCode::InvalidArgument, "radius grid is empty");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] >= 0.0) || !std::isfinite(radii[i])) {
      throw Error(ErrorCode::InvalidArgument, "radii must be finite and nonnegative");
    }
    if (i > 0 && !(radii[i] > radii[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "radii must be strictly ascending");
    }
  }
  if (!(jitter > 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter must be positive");
  if (threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");
}

std::vector<double> uniform_grid(double lo, double hi, int count) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one point");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
  out.back() = hi;
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(trial) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd sample_disturbances(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, int N,
                                    std::uint64_t seed) {
  const Eigen::Index d = mu.size();
  require_square(Sigma, d, "covariance");
  if (!is_psd(Sigma)) throw Error(ErrorCode::NotPSD, "covariance must be positive semidefinite");
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "N must be >= 1");
  const Eigen::MatrixXd root = psd_sqrt(Sigma);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(d, N);
  Eigen::VectorXd z(d);
  for (int i = 0; i < N; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) z(k) = normal(rng);
    out.col(i) = mu + root * z;
  }
  return out;
}

MomentEstimate empirical_second_moment(const Eigen::MatrixXd& samples, double jitter) {
  if (samples.cols() < 1 || samples.rows() < 1) {
    throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  }
  MomentEstimate est;
  est.M0 = samples * samples.transpose() / static_cast<double>(samples.cols());
  est.M0 = (est.M0 + est.M0.transpose()) / 2.0;
  if (eigen_range(est.M0).first <= jitter) {
    est.M0 += jitter * Eigen::MatrixXd::Identity(samples.rows(), samples.rows());
    est.jittered = true;
  }
  return est;
}

double exact_expected_cost(const Gain& K, const Dynamics& sd, const Eigen::VectorXd& mu,
                           const Eigen::MatrixXd& Sigma) {
  const int nx = sd.state_dim();
  if (mu.size() != nx) throw Error(ErrorCode::DimensionMismatch, "mean must have length Nx");
  require_square(Sigma, nx, "covariance");
  const Eigen::MatrixXd second = Sigma + mu * mu.transpose();
  return ((regret_matrix(K, sd) + sd.n_cost) * second).trace();
}

namespace {

CellRecord run_cell(Method method, const Dynamics& sd, const Ambiguity& amb, const ExperimentConfig& cfg) {
  CellRecord cell;
  cell.method = method;
  cell.radius = amb.radius;
  cell.K = Gain(sd.n, sd.m, sd.T);
  cell.gamma = std::numeric_limits<double>::quiet_NaN();
  try {
    SynthesisResult syn = synthesize(method, sd, amb, cfg.solver);
    cell.K = std::move(syn.K);
    cell.status = syn.status;
    cell.objective = syn.objective;
    cell.gamma = syn.gamma;
    cell.message = std::move(syn.message);
    if (syn.status == SolveStatus::Error || syn.status == SolveStatus::Infeasible) {
      cell.skipped = true;
      return cell;
    }
    const DualResult<double> wc = method == Method::Mro ? worst_case_regret(cell.K, sd, amb)
                                                        : worst_case_cost(cell.K, sd, amb);
    cell.worst_case_value = wc.value;
    cell.expected_cost = exact_expected_cost(cell.K, sd, cfg.mu, cfg.Sigma);
  } catch (const Error& e) {
    cell.status = SolveStatus::Error;
    cell.skipped = true;
    cell.message = e.what();
  }
  return cell;
}

}  // namespace

ExperimentResult run_radius_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dynamics sd = assemble(cfg.system, cfg.cost);
  const int nr = static_cast<int>(cfg.radii.size());
  const int per_trial = 2 * nr;

  ExperimentResult res;
  res.radii = cfg.radii;
  res.trials.resize(cfg.trials);
  res.cells.resize(static_cast<std::size_t>(cfg.trials) * per_trial);
  res.cost_floor = (sd.n_cost * (cfg.Sigma + cfg.mu * cfg.mu.transpose())).trace();

  auto run_trial = [&](int t) {
    TrialInfo& info = res.trials[t];
    info.seed = trial_seed(cfg.seed, t);
    const Eigen::MatrixXd w = sample_disturbances(cfg.mu, cfg.Sigma, cfg.samples, info.seed);
    MomentEstimate est = empirical_second_moment(w, cfg.jitter);
    info.jittered = est.jittered;
    Ambiguity amb = Ambiguity::from_moment(std::move(est.M0), 0.0);
    for (int i = 0; i < nr; ++i) {
      amb.radius = cfg.radii[i];
      for (int k = 0; k < 2; ++k) {
        CellRecord cell = run_cell(k == 0 ? Method::Mro : Method::Dro, sd, amb, cfg);
        cell.trial = t;
        cell.radius_index = i;
        res.cells[static_cast<std::size_t>(t) * per_trial + 2 * i + k] = std::move(cell);
      }
    }
  };

  const int workers = std::min(cfg.threads, cfg.trials);
  if (workers <= 1) {
    for (int t = 0; t < cfg.trials; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int t = next++; t < cfg.trials; t = next++) run_trial(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (const CellRecord& c : res.cells) {
    if (c.skipped) ++res.skipped;
    if (c.status == SolveStatus::Inaccurate) ++res.inaccurate;
  }
  return res;
}

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<SummaryRow> summarize(const ExperimentResult& res) {
  std::vector<SummaryRow> rows;
  const int nr = static_cast<int>(res.radii.size());
  for (int i = 0; i < nr; ++i) {
    for (Method method : {Method::Mro, Method::Dro}) {
      SummaryRow row;
      row.radius = res.radii[i];
      row.method = method;
      std::vector<double> v;
      for (const CellRecord& c : res.cells) {
        if (c.radius_index != i || c.method != method) continue;
        if (c.skipped) {
          ++row.skipped;
        } else {
          v.push_back(c.expected_cost);
        }
      }
      row.count = static_cast<int>(v.size());
      double sum = 0.0;
      for (double x : v) sum += x;
      row.mean = v.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(v.size());
      std::sort(v.begin(), v.end());
      row.q20 = quantile(v, 0.2);
      row.q80 = quantile(v, 0.8);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace drc
