#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace drc;
using namespace drc::testing;

namespace {

// Direct simulation of x_{t+1} = A_t x_t + B_t u_t + w_t with w = (x_0, w_0, ..., w_{T-1}).
Eigen::VectorXd rollout(const LtvSystem<double>& sys, const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  const int n = sys.n, m = sys.m;
  Eigen::VectorXd x(sys.state_dim());
  x.head(n) = w.head(n);
  for (int t = 0; t < sys.T; ++t) {
    x.segment((t + 1) * n, n) =
        sys.A[t] * x.segment(t * n, n) + sys.B[t] * u.segment(t * m, m) + w.segment((t + 1) * n, n);
  }
  return x;
}

double direct_cost(const LtvSystem<double>& sys, const CostSpec<double>& cost, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& w) {
  const Eigen::VectorXd x = rollout(sys, u, w);
  return x.dot(cost.Q * x) + u.dot(cost.R * u);
}

}  // namespace

TEST(StackDynamics, ScalarOneStep) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  auto [F, G] = stack_dynamics(LtvSystem<double>::time_invariant(one, one, 1));
  Eigen::MatrixXd f(2, 1), g(2, 2);
  f << 0, 1;
  g << 1, 0, 1, 1;
  EXPECT_EQ(F, f);
  EXPECT_EQ(G, g);
}

TEST(StackDynamics, ScalarTwoSteps) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  auto [F, G] = stack_dynamics(LtvSystem<double>::time_invariant(one, one, 2));
  Eigen::MatrixXd f(3, 2), g(3, 3);
  f << 0, 0, 1, 0, 1, 1;
  g << 1, 0, 0, 1, 1, 0, 1, 1, 1;
  EXPECT_EQ(F, f);
  EXPECT_EQ(G, g);
}

TEST(StackDynamics, ZeroInputsGiveZeroTrajectory) {
  std::mt19937_64 rng(1);
  const auto sys = random_system(rng, 2, 1, 4);
  auto [F, G] = stack_dynamics(sys);
  const Eigen::VectorXd x = F * Eigen::VectorXd::Zero(sys.input_dim()) + G * Eigen::VectorXd::Zero(sys.state_dim());
  EXPECT_EQ(x.norm(), 0.0);
}

TEST(StackDynamics, MatchesRolloutAndBlockStructure) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 1, 3), m = uniform_int(rng, 1, 2), T = uniform_int(rng, 1, 5);
    const auto sys = random_system(rng, n, m, T);
    auto [F, G] = stack_dynamics(sys);
    const Eigen::VectorXd u = random_vector(rng, sys.input_dim());
    const Eigen::VectorXd w = random_vector(rng, sys.state_dim());
    EXPECT_LE((F * u + G * w - rollout(sys, u, w)).norm(), 1e-12 * (1 + w.norm() + u.norm()));
    EXPECT_EQ(F.topRows(n).norm(), 0.0);
    for (int t = 0; t <= T; ++t) {
      EXPECT_EQ(G.block(t * n, t * n, n, n), Eigen::MatrixXd::Identity(n, n));
      for (int k = t + 1; k <= T; ++k) EXPECT_EQ(G.block(t * n, k * n, n, n).norm(), 0.0);
      for (int k = t; k < T; ++k) EXPECT_EQ(F.block(t * n, k * m, n, m).norm(), 0.0);
    }
  }
}

TEST(StackDynamics, RejectsBadDimensions) {
  LtvSystem<double> sys = LtvSystem<double>::time_invariant(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), 2);
  sys.A[1] = Eigen::MatrixXd::Ones(2, 2);
  EXPECT_THROW(stack_dynamics(sys), Error);
  sys = LtvSystem<double>::time_invariant(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), 2);
  sys.B.pop_back();
  EXPECT_THROW(stack_dynamics(sys), Error);
}

TEST(Assemble, ScalarExampleNoncausalGain) {
  for (double c : {1.0, 1.5, 3.0}) {
    const Dynamics sd = scalar_example(c);
    EXPECT_NEAR(sd.k_star(0, 0), -1.0 / (1.0 + c), 1e-14);
    EXPECT_NEAR(sd.k_star(0, 1), -1.0 / (1.0 + c), 1e-14);
    EXPECT_NEAR(sd.D(0, 0), 1.0 + c, 1e-14);
    EXPECT_LE((sd.n_cost - c / (1.0 + c) * Eigen::MatrixXd::Ones(2, 2)).norm(), 1e-14);
    for (double rho : {-1.0, -0.3, 0.0, 0.5, 1.0}) {
      EXPECT_NEAR((sd.n_cost * correlation(rho)).trace(), 2 * c * (1 + rho) / (1 + c), 1e-14);
    }
  }
}

TEST(Assemble, ZeroStateWeight) {
  std::mt19937_64 rng(3);
  const auto sys = random_system(rng, 2, 1, 3);
  CostSpec<double> cost = CostSpec<double>::identity(sys.state_dim(), sys.input_dim());
  cost.Q.setZero();
  const Dynamics sd = assemble(sys, cost);
  EXPECT_EQ(sd.k_star.norm(), 0.0);
  EXPECT_EQ(sd.n_cost.norm(), 0.0);
}

TEST(Assemble, RejectsIndefiniteInputWeight) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const auto sys = LtvSystem<double>::time_invariant(one, one, 1);
  CostSpec<double> cost = CostSpec<double>::identity(2, 1);
  cost.R(0, 0) = 0.0;
  EXPECT_THROW(assemble(sys, cost), Error);
  cost.R(0, 0) = 1.0;
  cost.Q(0, 0) = -1.0;
  EXPECT_THROW(assemble(sys, cost), Error);
}

TEST(Cost, ZeroAndScalarExample) {
  const double c = 1.5;
  const Dynamics sd = scalar_example(c);
  CostSpec<double> spec;
  spec.Q = Eigen::Vector2d(0.0, 1.0).asDiagonal();
  spec.R = Eigen::MatrixXd::Constant(1, 1, c);
  EXPECT_EQ(cost(sd, spec, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2)), 0.0);
  const Eigen::Vector2d w(0.7, -0.2);
  Eigen::VectorXd u(1);
  u << -(w(0) + w(1)) / (1 + c);
  EXPECT_NEAR(cost(sd, spec, u, w), c * std::pow(w(0) + w(1), 2) / (1 + c), 1e-14);
  EXPECT_NEAR(cost(sd, spec, u, w), w.dot(sd.n_cost * w), 1e-14);
}

TEST(Cost, CompletingTheSquareIdentity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = uniform_int(rng, 1, 3), m = uniform_int(rng, 1, 2), T = uniform_int(rng, 1, 4);
    const auto sys = random_system(rng, n, m, T);
    const auto spec = random_cost(rng, sys.state_dim(), sys.input_dim());
    const Dynamics sd = assemble(sys, spec);
    const Eigen::VectorXd u = random_vector(rng, sys.input_dim());
    const Eigen::VectorXd w = random_vector(rng, sys.state_dim());
    const double J = direct_cost(sys, spec, u, w);
    const Eigen::VectorXd e = u - sd.k_star * w;
    EXPECT_LE(std::abs(J - e.dot(sd.D * e) - w.dot(sd.n_cost * w)), 1e-9 * (1 + std::abs(J)));
  }
}

TEST(Cost, NoncausalGainIsOptimal) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = random_system(rng, 2, 2, 3);
    const auto spec = random_cost(rng, sys.state_dim(), sys.input_dim());
    const Dynamics sd = assemble(sys, spec);
    const Eigen::VectorXd w = random_vector(rng, sys.state_dim());
    const Eigen::VectorXd u_star = sd.k_star * w;
    const double best = direct_cost(sys, spec, u_star, w);
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd delta = random_vector(rng, sys.input_dim()) * uniform_real(rng, 1e-4, 1.0);
      EXPECT_GE(direct_cost(sys, spec, u_star + delta, w), best - 1e-12 * (1 + best));
    }
  }
}

TEST(RegretMatrix, VanishesAtNoncausalGain) {
  std::mt19937_64 rng(6);
  const auto sys = random_system(rng, 2, 1, 3);
  const Dynamics sd = assemble(sys, random_cost(rng, sys.state_dim(), sys.input_dim()));
  EXPECT_LE(regret_matrix(sd.k_star, sd).norm(), 1e-14);
}

TEST(RegretMatrix, ScalarExampleRegrets) {
  for (double c : {1.0, 1.5, 4.0}) {
    const Dynamics sd = scalar_example(c);
    Eigen::MatrixXd k(1, 2);
    k << -1.0 / (1 + c), 0.0;
    for (double rho : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      EXPECT_NEAR((regret_matrix(k, sd) * correlation(rho)).trace(), 1.0 / (1 + c), 1e-14);
    }
    k << -2.0 / (1 + c), 0.0;
    EXPECT_NEAR((regret_matrix(k, sd) * correlation(-1.0)).trace(), 4.0 / (1 + c), 1e-14);
  }
}

TEST(Regret, MatchesQuadraticFormAndIsNonnegative) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = uniform_int(rng, 1, 3), m = uniform_int(rng, 1, 2), T = uniform_int(rng, 1, 4);
    const auto sys = random_system(rng, n, m, T);
    const auto spec = random_cost(rng, sys.state_dim(), sys.input_dim());
    const Dynamics sd = assemble(sys, spec);
    const Gain K = Gain::project(n, m, T, random_matrix(rng, sys.input_dim(), sys.state_dim()));
    const Eigen::VectorXd w = random_vector(rng, sys.state_dim());
    const Eigen::MatrixXd C = regret_matrix(K, sd);
    const double direct = direct_cost(sys, spec, K.matrix() * w, w) - direct_cost(sys, spec, sd.k_star * w, w);
    EXPECT_LE(std::abs(regret(K.matrix(), sd, spec, w) - w.dot(C * w)), 1e-10 * (1 + std::abs(direct)));
    EXPECT_LE(std::abs(direct - w.dot(C * w)), 1e-9 * (1 + std::abs(direct)));
    EXPECT_GE(direct, -1e-10);
    EXPECT_TRUE(is_psd(C));
    EXPECT_EQ(regret(K.matrix(), sd, spec, Eigen::VectorXd::Zero(sys.state_dim())), 0.0);
  }
}

TEST(Regret, ZeroForCausalNoncausalGain) {
  std::mt19937_64 rng(8);
  const auto sys = random_system(rng, 1, 1, 3);
  CostSpec<double> spec = CostSpec<double>::identity(sys.state_dim(), sys.input_dim());
  spec.Q.setZero();
  const Dynamics sd = assemble(sys, spec);
  for (int k = 0; k < 10; ++k) {
    EXPECT_EQ(regret(sd.k_star, sd, spec, random_vector(rng, sys.state_dim())), 0.0);
  }
}
