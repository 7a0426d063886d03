#pragma once

// Worst-case expectations of quadratic forms w^T C w over the type-2 Wasserstein ball
//   { P : W_2(P, P0) <= r },
// through the one-dimensional dual
//   g(gamma) = gamma (r^2 - tr M0) + gamma^2 tr(M0 (gamma I - C)^{-1}),  gamma I > C,
// and the extremal pushforward w* = gamma* (gamma* I - C)^{-1} w, w ~ P0.

#include <drc/types.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace drc {

template <typename Scalar>
struct AmbiguitySet {
  Matrix<Scalar> M0;     // nominal second moment E[w w^T]
  Vector<Scalar> mean0;  // nominal mean (zero when unknown)
  Scalar radius = Scalar(0);
  /// Optional: draws w ~ P0. Only used for diagnostics and worst-case sampling.
  std::function<Vector<Scalar>(std::mt19937_64&)> sampler;

  static AmbiguitySet from_moment(Matrix<Scalar> m0, Scalar r) {
    AmbiguitySet amb;
    amb.mean0 = Vector<Scalar>::Zero(m0.rows());
    amb.M0 = std::move(m0);
    amb.radius = r;
    return amb;
  }

  Eigen::Index dim() const { return M0.rows(); }

  void validate() const {
    require_square(M0, M0.rows(), "M0");
    if (!(radius >= Scalar(0)) || !std::isfinite(static_cast<double>(radius))) {
      throw Error(ErrorCode::InvalidArgument, "radius must be finite and nonnegative");
    }
    if (mean0.size() != M0.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "mean0 must match M0");
    }
    if (!is_psd(M0)) throw Error(ErrorCode::NotPSD, "M0 must be positive semidefinite");
    const Matrix<Scalar> cov = M0 - mean0 * mean0.transpose();
    if (!is_psd(cov)) throw Error(ErrorCode::NotPSD, "M0 - mean0 mean0^T must be PSD");
  }

  /// M0 > 0 is needed by the dual machinery (absolutely continuous nominal).
  void require_positive_definite() const {
    const Scalar lo = eigen_range(M0).first;
    if (lo <= Scalar(tol::pd_abs) * (Scalar(1) + M0.norm())) {
      throw Error(ErrorCode::MomentSingular, "M0 must be positive definite");
    }
  }
};

template <typename Scalar>
struct DualResult {
  Scalar value = Scalar(0);
  /// +inf when r = 0 (the ball is a singleton) or C = 0 (degenerate).
  Scalar gamma_star = std::numeric_limits<Scalar>::infinity();
  Scalar residual16 = Scalar(0);  // |tr((gamma(gamma I - C)^{-1} - I)^2 M0) - r^2|
  int iterations = 0;
  bool degenerate = false;  // C = 0 short-circuit
};

template <typename Scalar>
struct PushforwardMap {
  Matrix<Scalar> S;  // gamma* (gamma* I - C)^{-1}
};

template <typename Scalar>
struct WorstCaseMoments {
  Vector<Scalar> mean;
  Matrix<Scalar> M;
};

namespace detail {

template <typename Scalar>
Scalar pd_tolerance(const Matrix<Scalar>& C) {
  return Scalar(tol::pd_abs) * (Scalar(1) + C.norm());
}

template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> shifted_factor(Scalar gamma, const Matrix<Scalar>& C) {
  const Eigen::Index d = C.rows();
  const Matrix<Scalar> shifted = gamma * Matrix<Scalar>::Identity(d, d) - C;
  const Scalar lo = eigen_range(shifted).first;
  if (lo <= pd_tolerance(C)) {
    throw Error(ErrorCode::GammaInfeasible, "gamma I - C is not positive definite");
  }
  return Eigen::LLT<Matrix<Scalar>>(shifted);
}

template <typename Scalar>
void check_dims(const Matrix<Scalar>& C, const AmbiguitySet<Scalar>& amb) {
  require_square(C, amb.dim(), "C");
}

}  // namespace detail

template <typename Scalar>
Scalar dual_objective(Scalar gamma, const Matrix<Scalar>& C, const AmbiguitySet<Scalar>& amb) {
  detail::check_dims(C, amb);
  const auto llt = detail::shifted_factor(gamma, C);
  const Scalar r2 = amb.radius * amb.radius;
  return gamma * (r2 - amb.M0.trace()) + gamma * gamma * llt.solve(amb.M0).trace();
}

/// g'(gamma) = r^2 - tr((I - gamma (gamma I - C)^{-1})^2 M0)
template <typename Scalar>
Scalar dual_derivative(Scalar gamma, const Matrix<Scalar>& C, const AmbiguitySet<Scalar>& amb) {
  detail::check_dims(C, amb);
  const auto llt = detail::shifted_factor(gamma, C);
  const Eigen::Index d = C.rows();
  const Matrix<Scalar> e = Matrix<Scalar>::Identity(d, d) - gamma * llt.solve(Matrix<Scalar>::Identity(d, d));
  const Scalar r2 = amb.radius * amb.radius;
  return r2 - (e * e * amb.M0).trace();
}

/// |tr((gamma (gamma I - C)^{-1} - I)^2 M0) - r^2|, evaluated with dense matrices.
template <typename Scalar>
Scalar optimality_residual(Scalar gamma, const Matrix<Scalar>& C, const AmbiguitySet<Scalar>& amb) {
  const Eigen::Index d = C.rows();
  const Matrix<Scalar> shifted = gamma * Matrix<Scalar>::Identity(d, d) - C;
  const Matrix<Scalar> e =
      gamma * shifted.llt().solve(Matrix<Scalar>::Identity(d, d)) - Matrix<Scalar>::Identity(d, d);
  return std::abs((e * e * amb.M0).trace() - amb.radius * amb.radius);
}

struct DualOptions {
  int max_iter = 200;
  double tol_root = 1e-10;  // scaled by (1 + r^2)
};

/// sup_{W_2(P, P0) <= r} E_P[w^T C w].
///
/// The minimiser of g on (lambda_max(C), inf) is the unique root of g', which is
/// increasing and concave there. The root is bracketed geometrically and refined by
/// Newton steps in the eigenbasis of C, with bisection whenever a step leaves the bracket.
template <typename Scalar>
DualResult<Scalar> worst_case_expectation(const Matrix<Scalar>& C, const AmbiguitySet<Scalar>& amb,
                                          const DualOptions& opts = {}) {
  amb.validate();
  detail::check_dims(C, amb);
  DualResult<Scalar> res;

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es((C + C.transpose()) / Scalar(2));
  const Vector<Scalar>& lam = es.eigenvalues();
  const Scalar tol_pd = detail::pd_tolerance(C);
  const Scalar lmax = lam.maxCoeff();

  if (lmax <= tol_pd && lam.minCoeff() >= -tol_pd) {
    res.degenerate = true;
    res.value = (C * amb.M0).trace();
    return res;
  }
  if (amb.radius == Scalar(0)) {
    res.value = (C * amb.M0).trace();
    return res;
  }
  if (lmax <= tol_pd) {
    throw Error(ErrorCode::CNotAdmissible, "lambda_max(C) must be positive");
  }
  amb.require_positive_definite();

  // Diagonal of M0 in the eigenbasis of C; all entries positive since M0 > 0.
  const Vector<Scalar> mass = (es.eigenvectors().transpose() * amb.M0 * es.eigenvectors()).diagonal();
  const Scalar r2 = amb.radius * amb.radius;

  auto derivative = [&](Scalar g) {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const Scalar q = lam(i) / (g - lam(i));
      s += mass(i) * q * q;
    }
    return r2 - s;
  };
  auto second_derivative = [&](Scalar g) {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const Scalar gap = g - lam(i);
      s += mass(i) * lam(i) * lam(i) / (gap * gap * gap);
    }
    return Scalar(2) * s;
  };

  Scalar lo = lmax * (Scalar(1) + Scalar(1e-8)) + Scalar(1e-12);
  Scalar hi = lmax + Scalar(1);
  int it = 0;
  while (derivative(hi) <= Scalar(0)) {
    lo = hi;
    hi = lmax + Scalar(2) * (hi - lmax);
    if (++it > opts.max_iter) throw Error(ErrorCode::NoConvergence, "failed to bracket gamma*");
  }

  const Scalar target = Scalar(opts.tol_root) * (Scalar(1) + r2) * Scalar(0.01);
  Scalar gamma = lo;
  Scalar dg = derivative(gamma);
  if (dg >= Scalar(0)) {
    // Bracket floor already past the root: the root sits within 1e-8 relative of lambda_max.
    gamma = lo;
  } else {
    bool converged = false;
    for (; it <= opts.max_iter; ++it) {
      if (std::abs(dg) <= target) {
        converged = true;
        break;
      }
      if (dg < Scalar(0)) lo = gamma; else hi = gamma;
      Scalar next = gamma - dg / second_derivative(gamma);
      if (!(next > lo && next < hi)) next = (lo + hi) / Scalar(2);
      if (next == gamma || hi - lo <= std::numeric_limits<Scalar>::epsilon() * hi) {
        converged = true;
        break;
      }
      gamma = next;
      dg = derivative(gamma);
    }
    if (!converged) throw Error(ErrorCode::NoConvergence, "gamma* root finding did not converge");
  }

  // g(gamma) = gamma r^2 + sum_i m_i gamma lambda_i / (gamma - lambda_i), which avoids
  // cancelling gamma tr M0 against gamma^2 tr(M0 (gamma I - C)^{-1}).
  Scalar value = gamma * r2;
  for (Eigen::Index i = 0; i < lam.size(); ++i) value += mass(i) * gamma * lam(i) / (gamma - lam(i));

  res.value = value;
  res.gamma_star = gamma;
  res.iterations = it;
  res.residual16 = optimality_residual(gamma, Matrix<Scalar>((C + C.transpose()) / Scalar(2)), amb);
  return res;
}

template <typename Scalar>
PushforwardMap<Scalar> worst_case_pushforward(const DualResult<Scalar>& res, const Matrix<Scalar>& C) {
  const Eigen::Index d = C.rows();
  if (!std::isfinite(static_cast<double>(res.gamma_star))) {
    return {Matrix<Scalar>::Identity(d, d)};
  }
  const Scalar gamma = res.gamma_star;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es((C + C.transpose()) / Scalar(2));
  const Vector<Scalar>& lam = es.eigenvalues();
  if (gamma - lam.maxCoeff() <= detail::pd_tolerance(C) || gamma <= Scalar(0)) {
    throw Error(ErrorCode::GammaInfeasible, "gamma* must exceed lambda_max(C) and 0");
  }
  const Vector<Scalar> scale = gamma / (gamma - lam.array());
  Matrix<Scalar> S = es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
  return {(S + S.transpose()) / Scalar(2)};
}

/// Moments of w* = S w for w ~ P0: mean S mean0, second moment S M0 S.
template <typename Scalar>
WorstCaseMoments<Scalar> worst_case_moments(const PushforwardMap<Scalar>& map,
                                            const AmbiguitySet<Scalar>& amb) {
  Matrix<Scalar> M = map.S * amb.M0 * map.S;
  return {map.S * amb.mean0, (M + M.transpose()) / Scalar(2)};
}

/// E||S w - w||^2 = tr((S - I) M0 (S - I)): the cost of the coupling (w, S w).
template <typename Scalar>
Scalar coupling_cost(const PushforwardMap<Scalar>& map, const AmbiguitySet<Scalar>& amb) {
  const Matrix<Scalar> e = map.S - Matrix<Scalar>::Identity(map.S.rows(), map.S.cols());
  return (e * amb.M0 * e).trace();
}

/// Columns are S w_i with w_i drawn from amb.sampler using a generator seeded with `seed`.
template <typename Scalar>
Matrix<Scalar> sample_worst_case(const PushforwardMap<Scalar>& map, const AmbiguitySet<Scalar>& amb,
                                 int count, std::uint64_t seed) {
  if (!amb.sampler) throw Error(ErrorCode::NoSampler, "ambiguity set has no nominal sampler");
  if (count < 0) throw Error(ErrorCode::InvalidArgument, "sample count must be nonnegative");
  std::mt19937_64 rng(seed);
  Matrix<Scalar> out(map.S.rows(), count);
  for (int i = 0; i < count; ++i) out.col(i) = map.S * amb.sampler(rng);
  return out;
}

/// Squared Gelbrich lower bound on W_2 between distributions with means m1, m2 and
/// covariances S1, S2: ||m1 - m2||^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}).
template <typename Scalar>
Scalar gelbrich_bound(const Vector<Scalar>& m1, const Matrix<Scalar>& cov1,
                      const Vector<Scalar>& m2, const Matrix<Scalar>& cov2) {
  const Eigen::Index d = m1.size();
  if (m2.size() != d) throw Error(ErrorCode::DimensionMismatch, "means differ in size");
  require_square(cov1, d, "covariance 1");
  require_square(cov2, d, "covariance 2");
  if (!is_psd(cov1) || !is_psd(cov2)) {
    throw Error(ErrorCode::NotPSD, "covariances must be positive semidefinite");
  }
  const Matrix<Scalar> root2 = psd_sqrt(cov2);
  const Matrix<Scalar> cross = psd_sqrt(Matrix<Scalar>(root2 * cov1 * root2));
  const Scalar b = (m1 - m2).squaredNorm() + cov1.trace() + cov2.trace() - Scalar(2) * cross.trace();
  return std::max(b, Scalar(0));
}

}  // namespace drc
