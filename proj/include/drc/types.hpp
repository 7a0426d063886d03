#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace drc {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using MatrixXb = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  NotPSD,
  IllConditioned,
  StructureViolation,
  GammaInfeasible,
  CNotAdmissible,
  MomentSingular,
  NoConvergence,
  NoSampler,
  KStarCausal,
  SolverFailure,
  Infeasible,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::StructureViolation: return "StructureViolation";
    case ErrorCode::GammaInfeasible: return "GammaInfeasible";
    case ErrorCode::CNotAdmissible: return "CNotAdmissible";
    case ErrorCode::MomentSingular: return "MomentSingular";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NoSampler: return "NoSampler";
    case ErrorCode::KStarCausal: return "KStarCausal";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace tol {
// PSD checks are relative to the matrix scale: lambda_min >= -psd_rel * (1 + ||A||).
inline constexpr double psd_rel = 1e-9;
inline constexpr double pd_abs = 1e-10;
inline constexpr double cond_max = 1e12;
}  // namespace tol

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, Eigen::Index n, const char* what) {
  if (a.rows() != n || a.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be " +
                                                  std::to_string(n) + "x" + std::to_string(n));
  }
}

/// Minimum and maximum eigenvalue of the symmetric part of `a`.
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> eigen_range(
    const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return true;
  const Scalar scale = Scalar(1) + a.norm();
  return eigen_range(a).first >= -Scalar(tol::psd_rel) * scale;
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues are clamped to 0.
template <typename Derived>
Matrix<typename Derived::Scalar> psd_sqrt(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
  const Vector<Scalar> root = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  Matrix<Scalar> out = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return (out + out.transpose()) / Scalar(2);
}

}  // namespace drc
