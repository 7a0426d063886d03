#pragma once

// Dense primal-dual interior-point solver for linear matrix inequality programs
//
//   minimize    c^T y
//   subject to  F0_j + sum_i y_i F_ij  >= 0   for every block j,
//
// paired with the dual  maximize -sum_j <F0_j, Z_j>  s.t.  sum_j <F_ij, Z_j> = c_i, Z_j >= 0.
// Search directions use the HKM scaling with a Mehrotra predictor-corrector step;
// the starting point is infeasible and primal and dual iterates share one step length.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace drc {

/// Coefficient of variable `var` at (row, col) of an LMI block; only row >= col is stored.
struct LmiEntry {
  int var;
  int row;
  int col;
  double value;
};

struct LmiBlock {
  std::string name;
  int size = 0;
  bool strict = false;
  Eigen::MatrixXd constant;
  std::vector<LmiEntry> entries;

  /// F0 + sum_i y_i F_i as a dense symmetric matrix.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const;
};

struct LmiProblem {
  Eigen::VectorXd objective;
  std::vector<LmiBlock> blocks;

  int num_variables() const { return static_cast<int>(objective.size()); }
};

struct LmiSolverOptions {
  int max_iter = 100;
  double tol_feas = 1e-9;
  double tol_gap = 1e-9;
  double step_fraction = 0.98;
  int verbosity = 0;
};

enum class LmiStatus { Optimal, Inaccurate, Infeasible, Error };

const char* to_string(LmiStatus status);

struct LmiSolverResult {
  LmiStatus status = LmiStatus::Error;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> Z;  // dual matrices
  std::vector<Eigen::MatrixXd> S;  // slack iterates
  double primal_objective = 0.0;   // c^T y
  double dual_objective = 0.0;     // -sum <F0, Z>
  double rel_gap = 0.0;
  double primal_infeasibility = 0.0;  // LMI residual, relative
  double dual_infeasibility = 0.0;    // equality residual, relative
  int iterations = 0;
  std::string message;
};

LmiSolverResult solve_lmi(const LmiProblem& problem, const LmiSolverOptions& opts = {});

}  // namespace drc
