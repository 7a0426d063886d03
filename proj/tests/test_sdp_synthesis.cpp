#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace drc;
using namespace drc::testing;

namespace {

struct Instance {
  Dynamics sd;
  Ambiguity amb;
};

Instance random_instance(std::mt19937_64& rng, int n, int m, int T, double r) {
  const auto sys = random_system(rng, n, m, T);
  Instance inst{assemble(sys, random_cost(rng, sys.state_dim(), sys.input_dim())), {}};
  inst.amb = Ambiguity::from_moment(random_spd(rng, sys.state_dim(), 0.3), r);
  return inst;
}

// Certainty-equivalent oracle: the stationarity condition D K M0 = D K* M0 on the support,
// written as a Kronecker system (M0 (x) D) vec K restricted to the free entries.
Eigen::MatrixXd ce_oracle(const Dynamics& sd, const Eigen::MatrixXd& M0) {
  const Eigen::Index nu = sd.input_dim(), nx = sd.state_dim();
  Eigen::MatrixXd kron(nu * nx, nu * nx);
  for (Eigen::Index a = 0; a < nx; ++a)
    for (Eigen::Index b = 0; b < nx; ++b) kron.block(a * nu, b * nu, nu, nu) = M0(a, b) * sd.D;
  const MatrixXb mask = support_pattern(sd.n, sd.m, sd.T);
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < nu * nx; ++k)
    if (mask(k % nu, k / nu)) idx.push_back(k);
  const Eigen::MatrixXd rhs_full = sd.D * sd.k_star * M0;
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(rhs_full.data(), nu * nx);
  Eigen::MatrixXd H(idx.size(), idx.size());
  Eigen::VectorXd b(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    b(i) = rhs(idx[i]);
    for (std::size_t j = 0; j < idx.size(); ++j) H(i, j) = kron(idx[i], idx[j]);
  }
  const Eigen::VectorXd x = H.fullPivLu().solve(b);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nu, nx);
  for (std::size_t i = 0; i < idx.size(); ++i) K(idx[i] % nu, idx[i] / nu) = x(i);
  return K;
}

void expect_schur_certificates(const ConicSolution& sol, const Eigen::MatrixXd& C, const Ambiguity& amb) {
  const Eigen::Index d = C.rows();
  const Eigen::MatrixXd shifted = sol.gamma * Eigen::MatrixXd::Identity(d, d) - C;
  EXPECT_GT(eigen_range(shifted).first, 0.0);
  const Eigen::MatrixXd half = psd_sqrt(amb.M0);
  const Eigen::MatrixXd bound = sol.gamma * sol.gamma * half * shifted.llt().solve(half);
  EXPECT_GE(eigen_range(Eigen::MatrixXd(sol.X - bound)).first, -1e-6 * (1 + sol.X.norm()));
  const double dual = dual_objective(sol.gamma, C, amb);
  EXPECT_LE(rel_err(sol.objective, dual), 1e-6);
}

}  // namespace

TEST(MethodNames, RoundTrip) {
  for (Method m : {Method::CertaintyEquivalent, Method::Mro, Method::Dro}) EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("lqr"), Error);
}

TEST(BuildSdp, ScalarBlockSizesAndVariables) {
  const Dynamics sd = scalar_example(1.5);
  const Ambiguity amb = Ambiguity::from_moment(Eigen::MatrixXd::Identity(2, 2), 0.5);
  const ConicProgram prog = build_mroc_sdp(sd, amb);
  ASSERT_EQ(prog.problem.blocks.size(), 4u);
  EXPECT_EQ(prog.problem.blocks[0].size, 3);
  EXPECT_TRUE(prog.problem.blocks[0].strict);
  EXPECT_EQ(prog.problem.blocks[1].size, 5);
  EXPECT_EQ(prog.problem.num_variables(), 1 + 1 + 3);
  EXPECT_EQ(prog.layout.num_variables, 5);
  // Objective: gamma (r^2 - tr M0) + tr X.
  EXPECT_DOUBLE_EQ(prog.problem.objective(prog.layout.gamma_index), 0.25 - 2.0);
  double trace_coeff = 0.0;
  for (std::size_t i = 0; i < prog.layout.x_positions.size(); ++i) {
    const auto [p, q] = prog.layout.x_positions[i];
    EXPECT_EQ(prog.problem.objective(prog.layout.x_offset + static_cast<int>(i)), p == q ? 1.0 : 0.0);
    trace_coeff += prog.problem.objective(prog.layout.x_offset + static_cast<int>(i));
  }
  EXPECT_EQ(trace_coeff, 2.0);
}

TEST(BuildSdp, TwoStepBlockSizes) {
  const Dynamics sd = random_walk(2);
  const ConicProgram prog = build_mroc_sdp(sd, Ambiguity::from_moment(Eigen::MatrixXd::Identity(3, 3), 1.0));
  EXPECT_EQ(prog.problem.blocks[0].size, 5);
  EXPECT_EQ(prog.problem.blocks[1].size, 8);
}

TEST(BuildSdp, LmiBlocksMatchSchurForms) {
  std::mt19937_64 rng(1);
  const Instance inst = random_instance(rng, 2, 1, 2, 0.7);
  const Eigen::Index nx = inst.sd.state_dim(), nu = inst.sd.input_dim();
  for (Method method : {Method::Mro, Method::Dro}) {
    const ConicProgram prog = method == Method::Mro ? build_mroc_sdp(inst.sd, inst.amb) : build_dro_sdp(inst.sd, inst.amb);
    const Gain K = Gain::project(2, 1, 2, random_matrix(rng, nu, nx));
    const double gamma = 3.1;
    Eigen::MatrixXd X = random_spd(rng, nx);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(prog.layout.num_variables);
    for (std::size_t i = 0; i < prog.layout.gain_positions.size(); ++i) {
      y(static_cast<Eigen::Index>(i)) = K.matrix()(prog.layout.gain_positions[i].first, prog.layout.gain_positions[i].second);
    }
    y(prog.layout.gamma_index) = gamma;
    for (std::size_t i = 0; i < prog.layout.x_positions.size(); ++i) {
      y(prog.layout.x_offset + static_cast<Eigen::Index>(i)) = X(prog.layout.x_positions[i].first, prog.layout.x_positions[i].second);
    }
    const Eigen::MatrixXd delta = K.matrix() - inst.sd.k_star;
    const Eigen::MatrixXd dinv = inst.sd.D.inverse();
    const Eigen::MatrixXd shift = method == Method::Dro ? inst.sd.n_cost : Eigen::MatrixXd::Zero(nx, nx);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nx, nx);

    Eigen::MatrixXd b18(nx + nu, nx + nu);
    b18 << gamma * I - shift, delta.transpose(), delta, dinv;
    EXPECT_LE((prog.problem.blocks[0].evaluate(y) - b18).norm(), 1e-10);

    const Eigen::MatrixXd half = psd_sqrt(inst.amb.M0);
    Eigen::MatrixXd epi = Eigen::MatrixXd::Zero(2 * nx + nu, 2 * nx + nu);
    epi.block(0, 0, nx, nx) = X;
    epi.block(0, nx, nx, nx) = gamma * half;
    epi.block(nx, 0, nx, nx) = gamma * half;
    epi.block(nx, nx, nx, nx) = gamma * I - shift;
    epi.block(nx, 2 * nx, nx, nu) = delta.transpose();
    epi.block(2 * nx, nx, nu, nx) = delta;
    epi.block(2 * nx, 2 * nx, nu, nu) = dinv;
    EXPECT_LE((prog.problem.blocks[1].evaluate(y) - epi).norm(), 1e-10);
    EXPECT_LE((prog.problem.blocks[2].evaluate(y) - X).norm(), 1e-12);
    EXPECT_DOUBLE_EQ(prog.problem.blocks[3].evaluate(y)(0, 0), gamma);
  }
}

TEST(BuildSdp, Errors) {
  // Q = 0 makes K* = 0, which is causal.
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const auto sys = LtvSystem<double>::time_invariant(one, one, 2);
  CostSpec<double> cost = CostSpec<double>::identity(3, 2);
  cost.Q.setZero();
  const Dynamics causal = assemble(sys, cost);
  const Ambiguity amb = Ambiguity::from_moment(Eigen::MatrixXd::Identity(3, 3), 1.0);
  try {
    build_mroc_sdp(causal, amb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KStarCausal);
  }
  const Ambiguity singular = Ambiguity::from_moment(Eigen::Vector3d(1, 1, 0).asDiagonal(), 1.0);
  try {
    build_dro_sdp(random_walk(2), singular);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MomentSingular);
  }
}

TEST(Synthesize, KStarCausalShortcut) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const auto sys = LtvSystem<double>::time_invariant(one, one, 2);
  CostSpec<double> cost = CostSpec<double>::identity(3, 2);
  cost.Q.setZero();
  const Dynamics sd = assemble(sys, cost);
  const SynthesisResult res = synthesize(Method::Mro, sd, Ambiguity::from_moment(Eigen::MatrixXd::Identity(3, 3), 1.0));
  EXPECT_TRUE(res.k_star_causal);
  EXPECT_EQ(res.objective, 0.0);
  EXPECT_EQ(res.K.matrix(), sd.k_star);
  EXPECT_TRUE(res.solver_stats.empty());
}

TEST(CertaintyEquivalent, ScalarExample) {
  for (double c : {1.0, 1.5, 3.0}) {
    const Dynamics sd = scalar_example(c);
    const Gain K = certainty_equivalent(sd, Eigen::MatrixXd::Identity(2, 2));
    EXPECT_NEAR(K.matrix()(0, 0), -1.0 / (1 + c), 1e-14);
    EXPECT_EQ(K.matrix()(0, 1), 0.0);
    for (double rho : {-0.9, -0.2, 0.4, 0.9}) {
      const Gain Kr = certainty_equivalent(sd, correlation(rho));
      EXPECT_NEAR(Kr.matrix()(0, 0), -(1 + rho) / (1 + c), 1e-14);
    }
  }
}

TEST(CertaintyEquivalent, MatchesKroneckerOracleAndIsStationary) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = uniform_int(rng, 1, 3), m = uniform_int(rng, 1, 2), T = uniform_int(rng, 1, 4);
    const Instance inst = random_instance(rng, n, m, T, 0.0);
    const Gain K = certainty_equivalent(inst.sd, inst.amb.M0);
    const Eigen::MatrixXd oracle = ce_oracle(inst.sd, inst.amb.M0);
    EXPECT_LE((K.matrix() - oracle).norm(), 1e-9 * (1 + oracle.norm()));
    const Eigen::MatrixXd grad = 2.0 * inst.sd.D * (K.matrix() - inst.sd.k_star) * inst.amb.M0;
    EXPECT_LE(K.mask().select(grad, Eigen::MatrixXd::Zero(grad.rows(), grad.cols())).norm(), 1e-9 * (1 + grad.norm()));
  }
}

TEST(CertaintyEquivalent, SingularMomentGivesMinimumNormSolution) {
  const Dynamics sd = random_walk(2);
  const Eigen::MatrixXd M0 = Eigen::Vector3d(1, 0, 0).asDiagonal();
  const Gain K = certainty_equivalent(sd, M0);
  // Columns for the unexcited disturbances are not identified and must stay zero.
  EXPECT_EQ(K.matrix().col(1).norm(), 0.0);
  EXPECT_EQ(K.matrix().col(2).norm(), 0.0);
  const Eigen::MatrixXd grad = sd.D * (K.matrix() - sd.k_star) * M0;
  EXPECT_LE(K.mask().select(grad, Eigen::MatrixXd::Zero(2, 3)).norm(), 1e-12);
}

TEST(Solve, ScalarSanityInstance) {
  const double c = 1.5;
  const Dynamics sd = scalar_example(c);
  const Ambiguity amb = Ambiguity::from_moment(Eigen::MatrixXd::Identity(2, 2), 0.01);
  const ConicSolution sol = solve(build_mroc_sdp(sd, amb));
  EXPECT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.K.matrix()(0, 0), -1.0 / (1 + c), 1e-2);
  EXPECT_EQ(sol.K.matrix()(0, 1), 0.0);
  for (const auto& r : sol.residuals) EXPECT_LE(r.violation, 1e-7);
}

TEST(Solve, SchurCertificatesAndPrimalDualConsistency) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng, 1, 2), m = uniform_int(rng, 1, 2), T = uniform_int(rng, 1, 3);
    const Instance inst = random_instance(rng, n, m, T, trial % 2 ? 0.1 : 1.0);
    for (Method method : {Method::Mro, Method::Dro}) {
      const ConicProgram prog = method == Method::Mro ? build_mroc_sdp(inst.sd, inst.amb) : build_dro_sdp(inst.sd, inst.amb);
      const ConicSolution sol = solve(prog);
      ASSERT_EQ(sol.status, SolveStatus::Optimal) << sol.message;
      Eigen::MatrixXd C = regret_matrix(sol.K, inst.sd);
      if (method == Method::Dro) C += inst.sd.n_cost;
      expect_schur_certificates(sol, C, inst.amb);
      const DualResult<double> wc = method == Method::Mro ? worst_case_regret(sol.K, inst.sd, inst.amb)
                                                          : worst_case_cost(sol.K, inst.sd, inst.amb);
      EXPECT_LE(rel_err(wc.value, sol.objective), 1e-6);
    }
  }
}

TEST(Solve, MroGainIsOptimalAgainstPerturbations) {
  std::mt19937_64 rng(4);
  const Instance inst = random_instance(rng, 2, 1, 3, 0.5);
  const SynthesisResult res = synthesize(Method::Mro, inst.sd, inst.amb);
  ASSERT_EQ(res.status, SolveStatus::Optimal);
  const double best = worst_case_regret(res.K, inst.sd, inst.amb).value;
  for (int k = 0; k < 50; ++k) {
    const Gain other = Gain::project(2, 1, 3, res.K.matrix() + random_matrix(rng, 3, 8, uniform_real(rng, 1e-3, 0.3)));
    EXPECT_GE(worst_case_regret(other, inst.sd, inst.amb).value, best - 1e-8 * (1 + best));
  }
}

TEST(Solve, WorstCaseCostDominatesRegret) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const Instance inst = random_instance(rng, 1, 1, 3, uniform_real(rng, 0.1, 2.0));
    const Gain K = Gain::project(1, 1, 3, random_matrix(rng, 3, 4));
    EXPECT_GE(worst_case_cost(K, inst.sd, inst.amb).value, worst_case_regret(K, inst.sd, inst.amb).value - 1e-10);
  }
}

TEST(Synthesize, ZeroRadiusEqualsCertaintyEquivalent) {
  std::mt19937_64 rng(6);
  const Instance inst = random_instance(rng, 1, 1, 4, 0.0);
  const SynthesisResult ce = synthesize(Method::CertaintyEquivalent, inst.sd, inst.amb);
  for (Method m : {Method::Mro, Method::Dro}) {
    const SynthesisResult r = synthesize(m, inst.sd, inst.amb);
    EXPECT_EQ(r.K.matrix(), ce.K.matrix());
    EXPECT_EQ(r.status, SolveStatus::Optimal);
  }
}

TEST(Synthesize, ObjectivesMonotoneInRadius) {
  const Dynamics sd = random_walk(4);
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd M0 = random_spd(rng, 5, 0.5);
  for (Method m : {Method::Mro, Method::Dro}) {
    double prev = -1.0;
    for (double r : {0.0, 0.25, 0.5, 1.0, 2.0, 3.0}) {
      const SynthesisResult res = synthesize(m, sd, Ambiguity::from_moment(M0, r));
      ASSERT_NE(res.status, SolveStatus::Error);
      EXPECT_GE(res.objective, prev - 1e-6 * (1 + std::abs(prev)));
      prev = res.objective;
    }
  }
}

TEST(Synthesize, DroApproachesCertaintyEquivalentCost) {
  const Dynamics sd = random_walk(10);
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd M0 = random_spd(rng, 11, 0.5);
  const Gain ce = certainty_equivalent(sd, M0);
  const double floor = ((regret_matrix(ce, sd) + sd.n_cost) * M0).trace();
  double prev = std::numeric_limits<double>::infinity();
  for (double r : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    const SynthesisResult res = synthesize(Method::Dro, sd, Ambiguity::from_moment(M0, r));
    ASSERT_NE(res.status, SolveStatus::Error);
    EXPECT_LE(res.objective, prev + 1e-6 * prev);
    EXPECT_GE(res.objective, floor - 1e-6 * floor);
    // The returned gain is scored by the exact dual at that gain.
    EXPECT_LE(rel_err(worst_case_cost(res.K, sd, Ambiguity::from_moment(M0, r)).value, res.objective), 1e-6);
    prev = res.objective;
  }
  EXPECT_LE(rel_err(prev, floor), 0.05);
}

TEST(Nested, AgreesWithSdpOnScalarSystems) {
  std::mt19937_64 rng(9);
  for (int T : {1, 2, 3}) {
    for (double r : {0.1, 1.0}) {
      const Instance inst = random_instance(rng, 1, 1, T, r);
      const SynthesisResult sdp = synthesize(Method::Mro, inst.sd, inst.amb);
      ASSERT_EQ(sdp.status, SolveStatus::Optimal);
      const NestedResult nested = nested_minimize(inst.sd, inst.amb);
      EXPECT_LE(std::abs(nested.value - sdp.objective), 1e-4 * (1 + std::abs(nested.value)));
      EXPECT_GE(nested.value, sdp.objective - 1e-6 * (1 + sdp.objective));
    }
  }
}

TEST(Nested, SmallRadiusConvergesToCertaintyEquivalent) {
  std::mt19937_64 rng(10);
  const Instance inst = random_instance(rng, 1, 1, 3, 1e-6);
  const NestedResult nested = nested_minimize(inst.sd, inst.amb);
  const Gain ce = certainty_equivalent(inst.sd, inst.amb.M0);
  EXPECT_LE((nested.K.matrix() - ce.matrix()).norm(), 1e-3 * (1 + ce.matrix().norm()));
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance inst = random_instance(rng, uniform_int(rng, 1, 2), 1, uniform_int(rng, 1, 3), trial % 2 ? 0.1 : 1.0);
    for (Objective obj : {Objective::Regret, Objective::Cost}) {
      const Gain K = Gain::project(inst.sd.n, inst.sd.m, inst.sd.T,
                                   inst.sd.k_star + random_matrix(rng, inst.sd.input_dim(), inst.sd.state_dim(), 0.3));
      const Eigen::MatrixXd g = worst_case_gradient(K, inst.sd, inst.amb, obj);
      auto W = [&](const Eigen::MatrixXd& k) {
        const Gain G = Gain::from_matrix(inst.sd.n, inst.sd.m, inst.sd.T, k);
        return obj == Objective::Regret ? worst_case_regret(G, inst.sd, inst.amb).value
                                        : worst_case_cost(G, inst.sd, inst.amb).value;
      };
      Eigen::MatrixXd fd = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          if (!K.mask()(i, j)) continue;
          const double h = 1e-5 * (1 + std::abs(K.matrix()(i, j)));
          Eigen::MatrixXd kp = K.matrix(), km = K.matrix();
          kp(i, j) += h;
          km(i, j) -= h;
          fd(i, j) = (W(kp) - W(km)) / (2 * h);
        }
      }
      EXPECT_LE((g - fd).norm(), 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}
