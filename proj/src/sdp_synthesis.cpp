#include <drc/sdp_synthesis.hpp>

#include <cmath>

namespace drc {

const char* to_string(Method method) {
  switch (method) {
    case Method::CertaintyEquivalent: return "ce";
    case Method::Mro: return "mro";
    case Method::Dro: return "dro";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "ce") return Method::CertaintyEquivalent;
  if (name == "mro") return Method::Mro;
  if (name == "dro") return Method::Dro;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "' (expected mro, dro or ce)");
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Inaccurate: return "Inaccurate";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Error: return "Error";
  }
  return "Error";
}

bool k_star_causal(const Dynamics& sd) {
  const MatrixXb mask = support_pattern(sd.n, sd.m, sd.T);
  for (Eigen::Index j = 0; j < sd.k_star.cols(); ++j)
    for (Eigen::Index i = 0; i < sd.k_star.rows(); ++i)
      if (!mask(i, j) && std::abs(sd.k_star(i, j)) > 1e-12) return false;
  return true;
}

namespace {

// PSD residual accepted at an Optimal point.
constexpr double kResidualTol = 1e-7;

void check_ambiguity(const Dynamics& sd, const Ambiguity& amb) {
  amb.validate();
  if (amb.dim() != sd.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "M0 must be Nx x Nx");
  }
  if (!(amb.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "SDP synthesis requires r > 0");
  amb.require_positive_definite();
}

ConicProgram build_program(Method kind, const Dynamics& sd, const Ambiguity& amb) {
  const int nx = sd.state_dim();
  const int nu = sd.input_dim();
  const bool dro = kind == Method::Dro;

  ConicProgram prog;
  prog.kind = kind;
  prog.radius = amb.radius;
  SdpLayout& lay = prog.layout;
  lay.n = sd.n;
  lay.m = sd.m;
  lay.T = sd.T;
  const MatrixXb mask = support_pattern(sd.n, sd.m, sd.T);
  for (int j = 0; j < nx; ++j)
    for (int i = 0; i < nu; ++i)
      if (mask(i, j)) lay.gain_positions.emplace_back(i, j);
  lay.gamma_index = static_cast<int>(lay.gain_positions.size());
  lay.x_offset = lay.gamma_index + 1;
  for (int q = 0; q < nx; ++q)
    for (int p = q; p < nx; ++p) lay.x_positions.emplace_back(p, q);
  lay.num_variables = lay.x_offset + static_cast<int>(lay.x_positions.size());

  Eigen::MatrixXd d_inv = sd.D.llt().solve(Eigen::MatrixXd::Identity(nu, nu));
  d_inv = (d_inv + d_inv.transpose()) / 2.0;
  const Eigen::MatrixXd m0_half = psd_sqrt(amb.M0);
  const int g = lay.gamma_index;

  LmiProblem& lp = prog.problem;
  lp.objective = Eigen::VectorXd::Zero(lay.num_variables);
  lp.objective(g) = amb.radius * amb.radius - amb.M0.trace();
  for (std::size_t k = 0; k < lay.x_positions.size(); ++k) {
    const auto [p, q] = lay.x_positions[k];
    if (p == q) lp.objective(lay.x_offset + static_cast<int>(k)) = 1.0;
  }

  // [gamma I - N, (K - K*)^T; K - K*, D^{-1}] > 0
  LmiBlock strict;
  strict.name = "gamma_bound";
  strict.size = nx + nu;
  strict.strict = true;
  strict.constant = Eigen::MatrixXd::Zero(nx + nu, nx + nu);
  if (dro) strict.constant.topLeftCorner(nx, nx) = -sd.n_cost;
  strict.constant.bottomLeftCorner(nu, nx) = -sd.k_star;
  strict.constant.topRightCorner(nx, nu) = -sd.k_star.transpose();
  strict.constant.bottomRightCorner(nu, nu) = d_inv;
  for (int i = 0; i < nx; ++i) strict.entries.push_back({g, i, i, 1.0});
  for (std::size_t k = 0; k < lay.gain_positions.size(); ++k) {
    const auto [i, j] = lay.gain_positions[k];
    strict.entries.push_back({static_cast<int>(k), nx + i, j, 1.0});
  }

  // [X, gamma M0^{1/2}, 0; gamma M0^{1/2}, gamma I - N, (K - K*)^T; 0, K - K*, D^{-1}] >= 0
  LmiBlock epi;
  epi.name = "epigraph";
  epi.size = 2 * nx + nu;
  epi.constant = Eigen::MatrixXd::Zero(epi.size, epi.size);
  if (dro) epi.constant.block(nx, nx, nx, nx) = -sd.n_cost;
  epi.constant.block(2 * nx, nx, nu, nx) = -sd.k_star;
  epi.constant.block(nx, 2 * nx, nx, nu) = -sd.k_star.transpose();
  epi.constant.bottomRightCorner(nu, nu) = d_inv;
  for (std::size_t k = 0; k < lay.x_positions.size(); ++k) {
    const auto [p, q] = lay.x_positions[k];
    epi.entries.push_back({lay.x_offset + static_cast<int>(k), p, q, 1.0});
  }
  for (int q = 0; q < nx; ++q)
    for (int p = 0; p < nx; ++p) epi.entries.push_back({g, nx + p, q, m0_half(p, q)});
  for (int i = 0; i < nx; ++i) epi.entries.push_back({g, nx + i, nx + i, 1.0});
  for (std::size_t k = 0; k < lay.gain_positions.size(); ++k) {
    const auto [i, j] = lay.gain_positions[k];
    epi.entries.push_back({static_cast<int>(k), 2 * nx + i, nx + j, 1.0});
  }

  LmiBlock xpsd;
  xpsd.name = "x_psd";
  xpsd.size = nx;
  xpsd.constant = Eigen::MatrixXd::Zero(nx, nx);
  for (std::size_t k = 0; k < lay.x_positions.size(); ++k) {
    const auto [p, q] = lay.x_positions[k];
    xpsd.entries.push_back({lay.x_offset + static_cast<int>(k), p, q, 1.0});
  }

  LmiBlock gnn;
  gnn.name = "gamma_nonneg";
  gnn.size = 1;
  gnn.constant = Eigen::MatrixXd::Zero(1, 1);
  gnn.entries.push_back({g, 0, 0, 1.0});

  lp.blocks = {std::move(strict), std::move(epi), std::move(xpsd), std::move(gnn)};
  return prog;
}

SolveStatus map_status(LmiStatus s) {
  switch (s) {
    case LmiStatus::Optimal: return SolveStatus::Optimal;
    case LmiStatus::Inaccurate: return SolveStatus::Inaccurate;
    case LmiStatus::Infeasible: return SolveStatus::Infeasible;
    case LmiStatus::Error: return SolveStatus::Error;
  }
  return SolveStatus::Error;
}

Eigen::MatrixXd objective_matrix(const Gain& K, const Dynamics& sd, Objective objective) {
  Eigen::MatrixXd c = regret_matrix(K, sd);
  if (objective == Objective::Cost) c += sd.n_cost;
  return c;
}

}  // namespace

ConicProgram build_mroc_sdp(const Dynamics& sd, const Ambiguity& amb) {
  check_ambiguity(sd, amb);
  if (k_star_causal(sd)) {
    throw Error(ErrorCode::KStarCausal, "K* is causal; use u = K* w directly");
  }
  return build_program(Method::Mro, sd, amb);
}

ConicProgram build_dro_sdp(const Dynamics& sd, const Ambiguity& amb) {
  check_ambiguity(sd, amb);
  return build_program(Method::Dro, sd, amb);
}

ConicSolution solve(const ConicProgram& prog, const SolverOpts& opts) {
  LmiSolverOptions lo;
  lo.max_iter = opts.max_iter;
  lo.tol_feas = opts.tol_feas;
  lo.tol_gap = opts.tol_gap;
  lo.verbosity = opts.verbosity;
  const LmiSolverResult r = solve_lmi(prog.problem, lo);

  const SdpLayout& lay = prog.layout;
  ConicSolution sol;
  sol.status = map_status(r.status);
  sol.message = r.message;
  sol.objective = r.primal_objective;
  sol.solver_stats = {{"iterations", r.iterations},
                      {"rel_gap", r.rel_gap},
                      {"primal_infeasibility", r.primal_infeasibility},
                      {"dual_infeasibility", r.dual_infeasibility},
                      {"primal_objective", r.primal_objective},
                      {"dual_objective", r.dual_objective}};

  const int nx = lay.n * (lay.T + 1);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(lay.m * lay.T, nx);
  for (std::size_t i = 0; i < lay.gain_positions.size(); ++i) {
    k(lay.gain_positions[i].first, lay.gain_positions[i].second) = r.y(static_cast<Eigen::Index>(i));
  }
  sol.K = Gain::from_matrix(lay.n, lay.m, lay.T, k);
  sol.gamma = r.y(lay.gamma_index);
  sol.X = Eigen::MatrixXd::Zero(nx, nx);
  for (std::size_t i = 0; i < lay.x_positions.size(); ++i) {
    const auto [p, q] = lay.x_positions[i];
    sol.X(p, q) = sol.X(q, p) = r.y(lay.x_offset + static_cast<int>(i));
  }

  bool residuals_ok = true;
  for (const LmiBlock& block : prog.problem.blocks) {
    BlockResidual br;
    br.name = block.name;
    br.strict = block.strict;
    br.min_eigenvalue = eigen_range(block.evaluate(r.y)).first;
    br.violation = std::max(0.0, -br.min_eigenvalue);
    if (br.violation > std::max(opts.tol_feas, kResidualTol)) residuals_ok = false;
    if (block.strict && br.min_eigenvalue < 1e-9 * (1.0 + std::abs(sol.gamma))) residuals_ok = false;
    sol.residuals.push_back(br);
  }
  if (sol.status == SolveStatus::Optimal && !residuals_ok) {
    sol.status = SolveStatus::Inaccurate;
    sol.message = "LMI residuals exceed tolerance at the returned point";
  }
  return sol;
}

Gain certainty_equivalent(const Dynamics& sd, const Eigen::MatrixXd& M0) {
  const int nx = sd.state_dim();
  require_square(M0, nx, "M0");
  if (!is_psd(M0)) throw Error(ErrorCode::NotPSD, "M0 must be positive semidefinite");

  Gain K(sd.n, sd.m, sd.T);
  const MatrixXb& mask = K.mask();
  std::vector<std::pair<int, int>> free;
  for (int j = 0; j < nx; ++j)
    for (int i = 0; i < sd.input_dim(); ++i)
      if (mask(i, j)) free.emplace_back(i, j);

  // Stationarity on the support: sum_{(k,l) free} D_ik M0_lj K_kl = (D K* M0)_ij.
  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd H(nf, nf);
  Eigen::VectorXd b(nf);
  const Eigen::MatrixXd target = sd.D * sd.k_star * M0;
  for (Eigen::Index a = 0; a < nf; ++a) {
    const auto [i, j] = free[a];
    b(a) = target(i, j);
    for (Eigen::Index c = 0; c < nf; ++c) {
      const auto [k, l] = free[c];
      H(a, c) = sd.D(i, k) * M0(l, j);
    }
  }
  Eigen::VectorXd x;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  const auto [lo, hi] = eigen_range(H);
  if (llt.info() == Eigen::Success && lo > tol::pd_abs * (1.0 + hi)) {
    x = llt.solve(b);
  } else {
    // Singular normal equations: minimum-norm solution.
    x = H.completeOrthogonalDecomposition().solve(b);
  }
  K.set_free_entries(x);
  return K;
}

DualResult<double> worst_case_regret(const Gain& K, const Dynamics& sd, const Ambiguity& amb) {
  return worst_case_expectation(objective_matrix(K, sd, Objective::Regret), amb);
}

DualResult<double> worst_case_cost(const Gain& K, const Dynamics& sd, const Ambiguity& amb) {
  return worst_case_expectation(objective_matrix(K, sd, Objective::Cost), amb);
}

namespace {

// Value and support-restricted gradient of the worst-case objective.
std::pair<double, Eigen::MatrixXd> value_and_gradient(const Gain& K, const Dynamics& sd,
                                                      const Ambiguity& amb, Objective objective) {
  const Eigen::MatrixXd c = objective_matrix(K, sd, objective);
  const DualResult<double> res = worst_case_expectation(c, amb);
  const Eigen::MatrixXd delta = K.matrix() - sd.k_star;
  Eigen::MatrixXd grad;
  if (res.degenerate) {
    grad = Eigen::MatrixXd::Zero(delta.rows(), delta.cols());
  } else if (!std::isfinite(res.gamma_star)) {
    grad = 2.0 * sd.D * delta * amb.M0;
  } else {
    const Eigen::Index d = c.rows();
    const Eigen::MatrixXd shifted = res.gamma_star * Eigen::MatrixXd::Identity(d, d) - c;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    const Eigen::MatrixXd a = llt.solve(amb.M0);
    const Eigen::MatrixXd p = llt.solve(a.transpose());  // C_g^{-1} M0 C_g^{-1}
    grad = 2.0 * res.gamma_star * res.gamma_star * sd.D * delta * p;
  }
  grad = K.mask().select(grad, Eigen::MatrixXd::Zero(grad.rows(), grad.cols()));
  return {res.value, grad};
}

}  // namespace

Eigen::MatrixXd worst_case_gradient(const Gain& K, const Dynamics& sd, const Ambiguity& amb,
                                    Objective objective) {
  return value_and_gradient(K, sd, amb, objective).second;
}

NestedResult nested_minimize(const Dynamics& sd, const Ambiguity& amb, const NestedOptions& opts) {
  amb.validate();
  amb.require_positive_definite();
  if (opts.objective == Objective::Regret && k_star_causal(sd)) {
    throw Error(ErrorCode::KStarCausal, "K* is causal; nothing to minimise");
  }

  Gain K = certainty_equivalent(sd, amb.M0);
  auto [value, grad] = value_and_gradient(K, sd, amb, opts.objective);
  Gain trial = K;

  auto evaluate = [&](const Eigen::VectorXd& x, double& v, Eigen::MatrixXd& g) {
    trial.set_free_entries(x);
    try {
      std::tie(v, g) = value_and_gradient(trial, sd, amb, opts.objective);
    } catch (const Error&) {
      v = std::numeric_limits<double>::infinity();
    }
  };

  NestedResult out;
  Eigen::VectorXd x = K.free_entries();
  Eigen::VectorXd gx = Gain::project(sd.n, sd.m, sd.T, grad).free_entries();
  Eigen::VectorXd x_prev, g_prev;
  double step = 1.0 / std::max(1.0, gx.norm());

  int it = 0;
  for (; it < opts.max_outer; ++it) {
    const double gnorm = gx.norm();
    if (gnorm <= opts.grad_tol * (1.0 + std::abs(value))) {
      out.converged = true;
      break;
    }
    // Barzilai-Borwein proposal, then Armijo backtracking.
    if (x_prev.size() > 0) {
      const Eigen::VectorXd s = x - x_prev;
      const Eigen::VectorXd yv = gx - g_prev;
      const double sy = s.dot(yv);
      step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
    }
    double v_new = 0.0;
    Eigen::MatrixXd g_new;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x - step * gx;
      evaluate(x_new, v_new, g_new);
      if (v_new <= value - opts.armijo_c1 * step * gnorm * gnorm) {
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) break;
    x_prev = x;
    g_prev = gx;
    x = x_new;
    value = v_new;
    gx = Gain::project(sd.n, sd.m, sd.T, g_new).free_entries();
  }

  out.K = Gain(sd.n, sd.m, sd.T);
  out.K.set_free_entries(x);
  out.value = value;
  out.grad_norm = gx.norm();
  out.iterations = it;
  if (!out.converged && gx.norm() <= opts.grad_tol * (1.0 + std::abs(value))) out.converged = true;
  return out;
}

SynthesisResult synthesize(Method method, const Dynamics& sd, const Ambiguity& amb,
                           const SolverOpts& opts) {
  amb.validate();
  if (amb.dim() != sd.state_dim()) throw Error(ErrorCode::DimensionMismatch, "M0 must be Nx x Nx");

  SynthesisResult out;
  out.method = method;
  if (method == Method::CertaintyEquivalent || amb.radius == 0.0) {
    out.K = certainty_equivalent(sd, amb.M0);
    const Objective obj = method == Method::Dro ? Objective::Cost : Objective::Regret;
    out.objective = (objective_matrix(out.K, sd, obj) * amb.M0).trace();
    return out;
  }
  if (method == Method::Mro && k_star_causal(sd)) {
    out.K = Gain::project(sd.n, sd.m, sd.T, sd.k_star);
    out.objective = 0.0;
    out.k_star_causal = true;
    return out;
  }
  const ConicProgram prog = method == Method::Mro ? build_mroc_sdp(sd, amb) : build_dro_sdp(sd, amb);
  ConicSolution sol = solve(prog, opts);
  out.K = std::move(sol.K);
  out.gamma = sol.gamma;
  out.objective = sol.objective;
  out.status = sol.status;
  out.solver_stats = std::move(sol.solver_stats);
  out.residuals = std::move(sol.residuals);
  out.message = std::move(sol.message);
  return out;
}

}  // namespace drc
