#pragma once

#include <drc/trajectory_algebra.hpp>

#include <string>
#include <utility>
#include <vector>

namespace drc {

/// Strictly causal support: block (t, k) of size m x n is free iff k <= t,
/// where block column 0 holds x_0 and block column k > 0 holds w_{k-1}.
inline MatrixXb support_pattern(int n, int m, int T) {
  if (n < 1 || m < 1 || T < 1) {
    throw Error(ErrorCode::DimensionMismatch, "support_pattern requires positive dimensions");
  }
  MatrixXb mask = MatrixXb::Constant(m * T, n * (T + 1), false);
  for (int t = 0; t < T; ++t) {
    mask.block(t * m, 0, m, (t + 1) * n).setConstant(true);
  }
  return mask;
}

/// Entries of `K` lying outside `mask`, as (row, col) pairs.
template <typename Derived>
std::vector<std::pair<int, int>> support_violations(const Eigen::MatrixBase<Derived>& K,
                                                    const MatrixXb& mask) {
  std::vector<std::pair<int, int>> bad;
  for (Eigen::Index j = 0; j < K.cols(); ++j) {
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      if (!mask(i, j) && K(i, j) != typename Derived::Scalar(0)) {
        bad.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return bad;
}

/// Throws StructureViolation listing every offending entry.
template <typename Derived>
void validate(const Eigen::MatrixBase<Derived>& K, int n, int m, int T) {
  const MatrixXb mask = support_pattern(n, m, T);
  if (K.rows() != mask.rows() || K.cols() != mask.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "gain must be mT x n(T+1)");
  }
  const auto bad = support_violations(K, mask);
  if (bad.empty()) return;
  std::string msg = "nonzero entries outside the causal support:";
  for (const auto& [i, j] : bad) {
    msg += " (" + std::to_string(i) + "," + std::to_string(j) + ")";
  }
  throw Error(ErrorCode::StructureViolation, msg);
}

template <typename Scalar>
class CausalGain {
 public:
  CausalGain() = default;

  /// Zero gain.
  CausalGain(int n, int m, int T)
      : n_(n), m_(m), T_(T), mask_(support_pattern(n, m, T)),
        K_(Matrix<Scalar>::Zero(m * T, n * (T + 1))) {}

  /// Checked construction; rejects entries outside the support.
  template <typename Derived>
  static CausalGain from_matrix(int n, int m, int T, const Eigen::MatrixBase<Derived>& K) {
    validate(K, n, m, T);
    CausalGain g(n, m, T);
    g.K_ = K;
    return g;
  }

  /// Orthogonal projection onto the causal subspace (zeroes the forbidden entries).
  template <typename Derived>
  static CausalGain project(int n, int m, int T, const Eigen::MatrixBase<Derived>& K) {
    CausalGain g(n, m, T);
    if (K.rows() != g.K_.rows() || K.cols() != g.K_.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "gain must be mT x n(T+1)");
    }
    g.K_ = g.mask_.select(K, Matrix<Scalar>::Zero(K.rows(), K.cols()));
    return g;
  }

  int n() const { return n_; }
  int m() const { return m_; }
  int T() const { return T_; }
  const Matrix<Scalar>& matrix() const { return K_; }
  const MatrixXb& mask() const { return mask_; }

  /// Free entries in column-major order; matches `set_free_entries`.
  Vector<Scalar> free_entries() const {
    Vector<Scalar> v(mask_.count());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < K_.cols(); ++j)
      for (Eigen::Index i = 0; i < K_.rows(); ++i)
        if (mask_(i, j)) v(k++) = K_(i, j);
    return v;
  }

  void set_free_entries(const Vector<Scalar>& v) {
    if (v.size() != mask_.count()) {
      throw Error(ErrorCode::DimensionMismatch, "wrong number of free gain entries");
    }
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < K_.cols(); ++j)
      for (Eigen::Index i = 0; i < K_.rows(); ++i)
        if (mask_(i, j)) K_(i, j) = v(k++);
  }

 private:
  int n_ = 0;
  int m_ = 0;
  int T_ = 0;
  MatrixXb mask_;
  Matrix<Scalar> K_;
};

/// u = K w
template <typename Scalar, typename Derived>
Vector<Scalar> apply(const CausalGain<Scalar>& K, const Eigen::MatrixBase<Derived>& w) {
  if (w.size() != K.matrix().cols()) {
    throw Error(ErrorCode::DimensionMismatch, "disturbance must have Nx entries");
  }
  return K.matrix() * w;
}

template <typename Scalar>
Matrix<Scalar> regret_matrix(const CausalGain<Scalar>& K, const StackedDynamics<Scalar>& sd) {
  return regret_matrix(K.matrix(), sd);
}

/// Equivalent causal state feedback L = (I + K G^{-1} F)^{-1} K G^{-1}, with L x = K w
/// along closed-loop trajectories. K G^{-1} F is strictly lower triangular, so both
/// inverses reduce to unit-lower triangular solves.
template <typename Scalar>
Matrix<Scalar> to_state_feedback(const CausalGain<Scalar>& K, const StackedDynamics<Scalar>& sd) {
  if (K.matrix().rows() != sd.input_dim() || K.matrix().cols() != sd.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "gain does not match the stacked dynamics");
  }
  const Matrix<Scalar> g_inv_f = sd.solve_g(sd.F);
  // K G^{-1} = (G^{-T} K^T)^T
  const Matrix<Scalar> k_g_inv =
      sd.G.transpose().template triangularView<Eigen::UnitUpper>().solve(K.matrix().transpose()).transpose();
  Matrix<Scalar> lhs = K.matrix() * g_inv_f;
  lhs.diagonal().array() += Scalar(1);
  return lhs.template triangularView<Eigen::UnitLower>().solve(k_g_inv);
}

}  // namespace drc
