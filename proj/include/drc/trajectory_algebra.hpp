#pragma once

// Stacked finite-horizon representation of x_{t+1} = A_t x_t + B_t u_t + w_t.
//
// Trajectories are stacked as
//   x = (x_0, ..., x_T)            in R^{Nx}, Nx = n (T + 1)
//   u = (u_0, ..., u_{T-1})        in R^{Nu}, Nu = m T
//   w = (x_0, w_0, ..., w_{T-1})   in R^{Nx}
// so that x = F u + G w with F strictly and G unit block lower triangular.

#include <drc/types.hpp>

#include <vector>

namespace drc {

template <typename Scalar>
struct LtvSystem {
  int n = 0;
  int m = 0;
  int T = 0;
  std::vector<Matrix<Scalar>> A;
  std::vector<Matrix<Scalar>> B;

  static LtvSystem time_invariant(const Matrix<Scalar>& a, const Matrix<Scalar>& b, int horizon) {
    LtvSystem sys;
    sys.n = static_cast<int>(a.rows());
    sys.m = static_cast<int>(b.cols());
    sys.T = horizon;
    sys.A.assign(horizon, a);
    sys.B.assign(horizon, b);
    sys.validate();
    return sys;
  }

  int state_dim() const { return n * (T + 1); }
  int input_dim() const { return m * T; }

  void validate() const {
    if (T < 1 || n < 1 || m < 1) {
      throw Error(ErrorCode::DimensionMismatch, "system requires T, n, m >= 1");
    }
    if (static_cast<int>(A.size()) != T || static_cast<int>(B.size()) != T) {
      throw Error(ErrorCode::DimensionMismatch, "A and B must each hold T matrices");
    }
    for (int t = 0; t < T; ++t) {
      if (A[t].rows() != n || A[t].cols() != n) {
        throw Error(ErrorCode::DimensionMismatch, "A[" + std::to_string(t) + "] must be n x n");
      }
      if (B[t].rows() != n || B[t].cols() != m) {
        throw Error(ErrorCode::DimensionMismatch, "B[" + std::to_string(t) + "] must be n x m");
      }
    }
  }
};

template <typename Scalar>
struct CostSpec {
  Matrix<Scalar> Q;  // Nx x Nx, PSD
  Matrix<Scalar> R;  // Nu x Nu, PD

  static CostSpec identity(int state_dim, int input_dim) {
    return {Matrix<Scalar>::Identity(state_dim, state_dim),
            Matrix<Scalar>::Identity(input_dim, input_dim)};
  }

  void validate(int state_dim, int input_dim) const {
    require_square(Q, state_dim, "Q");
    require_square(R, input_dim, "R");
    if ((Q - Q.transpose()).norm() > Scalar(tol::psd_rel) * (Scalar(1) + Q.norm()) ||
        (R - R.transpose()).norm() > Scalar(tol::psd_rel) * (Scalar(1) + R.norm())) {
      throw Error(ErrorCode::InvalidArgument, "Q and R must be symmetric");
    }
    if (!is_psd(Q)) throw Error(ErrorCode::NotPSD, "Q must be positive semidefinite");
    if (eigen_range(R).first <= Scalar(tol::pd_abs)) {
      throw Error(ErrorCode::NotPSD, "R must be positive definite");
    }
  }
};

template <typename Scalar>
struct StackedDynamics {
  int n = 0;
  int m = 0;
  int T = 0;
  Matrix<Scalar> F;       // Nx x Nu
  Matrix<Scalar> G;       // Nx x Nx, unit block lower triangular
  Matrix<Scalar> k_star;  // Nu x Nx, optimal noncausal gain
  Matrix<Scalar> D;       // R + F^T Q F
  Matrix<Scalar> n_cost;  // G^T (Q - Q F D^{-1} F^T Q) G

  int state_dim() const { return n * (T + 1); }
  int input_dim() const { return m * T; }

  /// G^{-1} v by forward substitution.
  template <typename Derived>
  Matrix<Scalar> solve_g(const Eigen::MatrixBase<Derived>& v) const {
    return G.template triangularView<Eigen::UnitLower>().solve(v);
  }
};

template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> stack_dynamics(const LtvSystem<Scalar>& sys) {
  sys.validate();
  const int n = sys.n, m = sys.m, T = sys.T;
  const int nx = sys.state_dim(), nu = sys.input_dim();
  Matrix<Scalar> F = Matrix<Scalar>::Zero(nx, nu);
  Matrix<Scalar> G = Matrix<Scalar>::Zero(nx, nx);
  G.topLeftCorner(n, n).setIdentity();
  for (int t = 0; t < T; ++t) {
    // Block row t+1 = A_t * (block row t) + [B_t at input t] + [I at disturbance t+1].
    F.middleRows((t + 1) * n, n) = sys.A[t] * F.middleRows(t * n, n);
    F.block((t + 1) * n, t * m, n, m) += sys.B[t];
    G.middleRows((t + 1) * n, n) = sys.A[t] * G.middleRows(t * n, n);
    G.block((t + 1) * n, (t + 1) * n, n, n).setIdentity();
  }
  return {std::move(F), std::move(G)};
}

template <typename Scalar>
StackedDynamics<Scalar> assemble(const LtvSystem<Scalar>& sys, const CostSpec<Scalar>& cost) {
  auto [F, G] = stack_dynamics(sys);
  cost.validate(sys.state_dim(), sys.input_dim());

  StackedDynamics<Scalar> sd;
  sd.n = sys.n;
  sd.m = sys.m;
  sd.T = sys.T;
  sd.D = cost.R + F.transpose() * cost.Q * F;
  sd.D = (sd.D + sd.D.transpose()) / Scalar(2);
  const auto [lo, hi] = eigen_range(sd.D);
  if (lo <= Scalar(tol::pd_abs) || hi / lo > Scalar(tol::cond_max)) {
    throw Error(ErrorCode::IllConditioned, "D = R + F^T Q F is not safely positive definite");
  }
  Eigen::LLT<Matrix<Scalar>> llt(sd.D);
  const Matrix<Scalar> ftq = F.transpose() * cost.Q;
  sd.k_star = -llt.solve(ftq * G);
  const Matrix<Scalar> inner = cost.Q - ftq.transpose() * llt.solve(ftq);
  sd.n_cost = G.transpose() * inner * G;
  sd.n_cost = (sd.n_cost + sd.n_cost.transpose()) / Scalar(2);
  sd.F = std::move(F);
  sd.G = std::move(G);
  return sd;
}

/// J(u, w) = x^T Q x + u^T R u with x = F u + G w.
template <typename Scalar, typename DerivedU, typename DerivedW>
Scalar cost(const StackedDynamics<Scalar>& sd, const CostSpec<Scalar>& spec,
            const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedW>& w) {
  if (u.size() != sd.input_dim() || w.size() != sd.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "cost: u must have Nu and w Nx entries");
  }
  const Vector<Scalar> x = sd.F * u + sd.G * w;
  return x.dot(spec.Q * x) + u.dot(spec.R * u);
}

/// C_K = (K - K*)^T D (K - K*), so that regret(K, w) = w^T C_K w.
template <typename Scalar, typename Derived>
Matrix<Scalar> regret_matrix(const Eigen::MatrixBase<Derived>& K, const StackedDynamics<Scalar>& sd) {
  if (K.rows() != sd.input_dim() || K.cols() != sd.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "gain must be Nu x Nx");
  }
  const Matrix<Scalar> delta = K - sd.k_star;
  Matrix<Scalar> c = delta.transpose() * sd.D * delta;
  return (c + c.transpose()) / Scalar(2);
}

/// J(Kw, w) - J(K*w, w), evaluated on both trajectories directly.
template <typename Scalar, typename DerivedK, typename DerivedW>
Scalar regret(const Eigen::MatrixBase<DerivedK>& K, const StackedDynamics<Scalar>& sd,
              const CostSpec<Scalar>& spec, const Eigen::MatrixBase<DerivedW>& w) {
  if (K.rows() != sd.input_dim() || K.cols() != sd.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "gain must be Nu x Nx");
  }
  const Vector<Scalar> u = K * w;
  const Vector<Scalar> u_star = sd.k_star * w;
  return cost(sd, spec, u, w) - cost(sd, spec, u_star, w);
}

}  // namespace drc
