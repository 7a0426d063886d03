#pragma once

// Controller synthesis over type-2 Wasserstein balls.
//
// MRO:  min_K sup_P E_P[w^T C_K w],            C_K = (K - K*)^T D (K - K*)
// DRO:  min_K sup_P E_P[w^T (C_K + N) w],      N = noncausal cost matrix
//
// Both are posed as LMI programs in (K on its causal support, gamma, X):
//   min  gamma (r^2 - tr M0) + tr X
//   s.t. [gamma I - N, (K-K*)^T; K-K*, D^{-1}] > 0
//        [X, gamma M0^{1/2}, 0; gamma M0^{1/2}, gamma I - N, (K-K*)^T; 0, K-K*, D^{-1}] >= 0
//        X >= 0, gamma >= 0
// with N = 0 for MRO.

#include <drc/causal_policy.hpp>
#include <drc/lmi_solver.hpp>
#include <drc/trajectory_algebra.hpp>
#include <drc/wasserstein_dual.hpp>

#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace drc {

using Dynamics = StackedDynamics<double>;
using Gain = CausalGain<double>;
using Ambiguity = AmbiguitySet<double>;

enum class Method { CertaintyEquivalent, Mro, Dro };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

/// Index map from the decision variables (K free entries, gamma, X lower triangle) to y.
struct SdpLayout {
  int n = 0;
  int m = 0;
  int T = 0;
  std::vector<std::pair<int, int>> gain_positions;  // column-major over the causal mask
  int gamma_index = 0;
  int x_offset = 0;
  std::vector<std::pair<int, int>> x_positions;  // (row >= col)
  int num_variables = 0;
};

struct ConicProgram {
  Method kind = Method::Mro;
  double radius = 0.0;
  LmiProblem problem;
  SdpLayout layout;
};

struct SolverOpts {
  int max_iter = 100;
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  int verbosity = 0;
};

enum class SolveStatus { Optimal, Inaccurate, Infeasible, Error };

const char* to_string(SolveStatus status);

struct BlockResidual {
  std::string name;
  double min_eigenvalue = 0.0;
  double violation = 0.0;  // max(0, -min_eigenvalue)
  bool strict = false;
};

struct ConicSolution {
  Gain K;
  double gamma = 0.0;
  Eigen::MatrixXd X;
  double objective = 0.0;
  SolveStatus status = SolveStatus::Error;
  std::map<std::string, double> solver_stats;
  std::vector<BlockResidual> residuals;
  std::string message;
};

/// True when K* has no mass outside the causal support (|entry| <= 1e-12).
bool k_star_causal(const Dynamics& sd);

ConicProgram build_mroc_sdp(const Dynamics& sd, const Ambiguity& amb);
ConicProgram build_dro_sdp(const Dynamics& sd, const Ambiguity& amb);

ConicSolution solve(const ConicProgram& prog, const SolverOpts& opts = {});

/// argmin_{K causal} tr((K - K*)^T D (K - K*) M0), the r = 0 solution of both problems.
Gain certainty_equivalent(const Dynamics& sd, const Eigen::MatrixXd& M0);

DualResult<double> worst_case_regret(const Gain& K, const Dynamics& sd, const Ambiguity& amb);
DualResult<double> worst_case_cost(const Gain& K, const Dynamics& sd, const Ambiguity& amb);

enum class Objective { Regret, Cost };

/// Envelope gradient of K -> sup_P E_P[w^T C w] restricted to the causal support:
/// 2 gamma*^2 D (K - K*) (gamma* I - C)^{-1} M0 (gamma* I - C)^{-1}.
Eigen::MatrixXd worst_case_gradient(const Gain& K, const Dynamics& sd, const Ambiguity& amb,
                                    Objective objective = Objective::Regret);

struct NestedOptions {
  int max_outer = 2000;
  double grad_tol = 1e-6;  // scaled by (1 + |value|)
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  Objective objective = Objective::Regret;
};

struct NestedResult {
  Gain K;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient descent on the worst-case objective, started at the
/// certainty-equivalent gain; an independent route to the SDP optimum.
NestedResult nested_minimize(const Dynamics& sd, const Ambiguity& amb, const NestedOptions& opts = {});

struct SynthesisResult {
  Method method = Method::Mro;
  Gain K;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double objective = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  std::map<std::string, double> solver_stats;
  std::vector<BlockResidual> residuals;
  bool k_star_causal = false;
  std::string message;
};

/// Dispatches to the certainty-equivalent solution (method CE or r = 0), the causal K*
/// shortcut (MRO with K* causal), or the SDP.
SynthesisResult synthesize(Method method, const Dynamics& sd, const Ambiguity& amb,
                           const SolverOpts& opts = {});

}  // namespace drc
