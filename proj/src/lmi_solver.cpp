#include <drc/lmi_solver.hpp>

#include <drc/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace drc {

const char* to_string(LmiStatus status) {
  switch (status) {
    case LmiStatus::Optimal: return "Optimal";
    case LmiStatus::Inaccurate: return "Inaccurate";
    case LmiStatus::Infeasible: return "Infeasible";
    case LmiStatus::Error: return "Error";
  }
  return "Error";
}

Eigen::MatrixXd LmiBlock::evaluate(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd out = constant;
  for (const LmiEntry& e : entries) {
    out(e.row, e.col) += y(e.var) * e.value;
    if (e.row != e.col) out(e.col, e.row) += y(e.var) * e.value;
  }
  return out;
}

namespace {

struct Coef {
  int row;
  int col;
  double value;
};

// One block with its coefficient matrices expanded to both triangles, grouped by variable.
struct BlockData {
  int size = 0;
  Eigen::MatrixXd constant;
  std::vector<int> vars;
  std::vector<std::vector<Coef>> coefs;
};

std::vector<BlockData> expand(const LmiProblem& problem) {
  std::vector<BlockData> out;
  out.reserve(problem.blocks.size());
  const int nvar = problem.num_variables();
  for (const LmiBlock& block : problem.blocks) {
    if (block.size <= 0 || block.constant.rows() != block.size || block.constant.cols() != block.size) {
      throw Error(ErrorCode::InvalidArgument, "LMI block '" + block.name + "' has inconsistent size");
    }
    BlockData bd;
    bd.size = block.size;
    bd.constant = (block.constant + block.constant.transpose()) / 2.0;
    std::vector<int> local(nvar, -1);
    for (const LmiEntry& e : block.entries) {
      if (e.var < 0 || e.var >= nvar || e.row < e.col || e.row >= block.size || e.col < 0) {
        throw Error(ErrorCode::InvalidArgument, "LMI block '" + block.name + "' references an invalid entry");
      }
      if (e.value == 0.0) continue;
      if (local[e.var] < 0) {
        local[e.var] = static_cast<int>(bd.vars.size());
        bd.vars.push_back(e.var);
        bd.coefs.emplace_back();
      }
      auto& list = bd.coefs[local[e.var]];
      list.push_back({e.row, e.col, e.value});
      if (e.row != e.col) list.push_back({e.col, e.row, e.value});
    }
    out.push_back(std::move(bd));
  }
  return out;
}

// tr(F G) for a coefficient list F and dense G.
double inner(const std::vector<Coef>& f, const Eigen::MatrixXd& g) {
  double s = 0.0;
  for (const Coef& c : f) s += c.value * g(c.col, c.row);
  return s;
}

Eigen::MatrixXd evaluate(const BlockData& bd, const Eigen::VectorXd& y) {
  Eigen::MatrixXd out = bd.constant;
  for (std::size_t a = 0; a < bd.vars.size(); ++a) {
    const double v = y(bd.vars[a]);
    if (v == 0.0) continue;
    for (const Coef& c : bd.coefs[a]) out(c.row, c.col) += v * c.value;
  }
  return out;
}

// Largest alpha with X + alpha dX >= 0 (X > 0), +inf if unbounded.
double max_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx) {
  Eigen::LLT<Eigen::MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  Eigen::MatrixXd w = llt.matrixL().solve(dx);
  w = llt.matrixL().solve(w.transpose()).transpose();
  w = (w + w.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return lo >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lo;
}

Eigen::MatrixXd sym(const Eigen::MatrixXd& a) { return (a + a.transpose()) / 2.0; }

}  // namespace

LmiSolverResult solve_lmi(const LmiProblem& problem, const LmiSolverOptions& opts) {
  const std::vector<BlockData> blocks = expand(problem);
  const int nvar = problem.num_variables();
  const Eigen::VectorXd& c = problem.objective;
  const std::size_t nb = blocks.size();

  int n_total = 0;
  double f0_norm = 0.0;
  for (const auto& bd : blocks) {
    n_total += bd.size;
    f0_norm += bd.constant.squaredNorm();
  }
  f0_norm = std::sqrt(f0_norm);
  const double c_norm = c.norm();

  LmiSolverResult res;
  res.y = Eigen::VectorXd::Zero(nvar);
  res.Z.resize(nb);
  res.S.resize(nb);

  // Starting point in the spirit of SDPT3: scaled identities sized from the data.
  for (std::size_t j = 0; j < nb; ++j) {
    const BlockData& bd = blocks[j];
    double max_f = 0.0;
    double max_ratio = 0.0;
    for (std::size_t a = 0; a < bd.vars.size(); ++a) {
      double fn = 0.0;
      for (const Coef& cf : bd.coefs[a]) fn += cf.value * cf.value;
      fn = std::sqrt(fn);
      max_f = std::max(max_f, fn);
      max_ratio = std::max(max_ratio, (1.0 + std::abs(c(bd.vars[a]))) / (1.0 + fn));
    }
    const double n = bd.size;
    const double zeta = std::max({10.0, std::sqrt(n), n * max_ratio});
    const double eta = std::max({10.0, std::sqrt(n), max_f, bd.constant.norm()});
    res.Z[j] = zeta * Eigen::MatrixXd::Identity(bd.size, bd.size);
    res.S[j] = eta * Eigen::MatrixXd::Identity(bd.size, bd.size);
  }

  std::vector<Eigen::MatrixXd> rd(nb), sinv(nb), dz(nb), ds(nb), dz_aff(nb), ds_aff(nb), zrds(nb),
      corr(nb);
  Eigen::VectorXd rp(nvar), rhs(nvar), dy(nvar);
  Eigen::MatrixXd schur(nvar, nvar);
  int stalled = 0;
  double last_ap = 0.0, last_ad = 0.0;

  auto fill_directions = [&](double sigma_mu, bool corrector) {
    for (std::size_t j = 0; j < nb; ++j) {
      const BlockData& bd = blocks[j];
      ds[j] = rd[j];
      for (std::size_t a = 0; a < bd.vars.size(); ++a) {
        const double v = dy(bd.vars[a]);
        for (const Coef& cf : bd.coefs[a]) ds[j](cf.row, cf.col) += v * cf.value;
      }
      Eigen::MatrixXd t = -res.Z[j] - res.Z[j] * ds[j] * sinv[j];
      if (sigma_mu != 0.0) t += sigma_mu * sinv[j];
      if (corrector) t -= corr[j];
      dz[j] = sym(t);
    }
  };

  // Solves for dy, then refines it against the exact map dy -> tr(F_i dZ(dy)) so that the
  // equality residual is removed even when the Schur complement is badly conditioned.
  auto directions = [&](const Eigen::VectorXd& rhs_in, double sigma_mu, bool corrector,
                        const auto& factor) {
    dy = factor.solve(rhs_in);
    fill_directions(sigma_mu, corrector);
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd eq = -rp;
      for (std::size_t j = 0; j < nb; ++j) {
        const BlockData& bd = blocks[j];
        for (std::size_t a = 0; a < bd.vars.size(); ++a) eq(bd.vars[a]) += inner(bd.coefs[a], dz[j]);
      }
      if (eq.norm() <= 1e-15 * (1.0 + c_norm)) break;
      dy += factor.solve(eq);
      fill_directions(sigma_mu, corrector);
    }
  };

  auto step_lengths = [&](double& ap, double& ad) {
    ap = std::numeric_limits<double>::infinity();
    ad = ap;
    for (std::size_t j = 0; j < nb; ++j) {
      ap = std::min(ap, max_step(res.Z[j], dz[j]));
      ad = std::min(ad, max_step(res.S[j], ds[j]));
    }
    ap = std::min(1.0, opts.step_fraction * ap);
    ad = std::min(1.0, opts.step_fraction * ad);
  };

  for (int iter = 0;; ++iter) {
    // Residuals and convergence measures at the current iterate.
    double rd_norm = 0.0;
    double mu_sum = 0.0;
    double dual_obj = 0.0;
    rp = c;
    for (std::size_t j = 0; j < nb; ++j) {
      const BlockData& bd = blocks[j];
      rd[j] = evaluate(bd, res.y) - res.S[j];
      rd_norm += rd[j].squaredNorm();
      mu_sum += (res.Z[j].cwiseProduct(res.S[j])).sum();
      dual_obj -= (bd.constant.cwiseProduct(res.Z[j])).sum();
      for (std::size_t a = 0; a < bd.vars.size(); ++a) rp(bd.vars[a]) -= inner(bd.coefs[a], res.Z[j]);
    }
    const double primal_obj = c.dot(res.y);
    const double mu = mu_sum / n_total;
    res.primal_objective = primal_obj;
    res.dual_objective = dual_obj;
    res.primal_infeasibility = std::sqrt(rd_norm) / (1.0 + f0_norm);
    res.dual_infeasibility = rp.norm() / (1.0 + c_norm);
    res.rel_gap = std::max(mu_sum, std::abs(primal_obj - dual_obj)) /
                  (1.0 + std::abs(primal_obj) + std::abs(dual_obj));
    res.iterations = iter;

    if (opts.verbosity > 0) {
      std::fprintf(stderr, "lmi %3d  pobj % .10e  dobj % .10e  gap %.2e  mu %.2e  pinf %.2e  dinf %.2e  step %.2e %.2e\n",
                   iter, primal_obj, dual_obj, res.rel_gap, mu, res.primal_infeasibility,
                   res.dual_infeasibility, last_ap, last_ad);
    }

    if (res.rel_gap <= opts.tol_gap && res.primal_infeasibility <= opts.tol_feas &&
        res.dual_infeasibility <= opts.tol_feas) {
      res.status = LmiStatus::Optimal;
      return res;
    }
    if (!res.y.allFinite() || res.y.norm() > 1e12) {
      res.status = LmiStatus::Infeasible;
      res.message = "iterates diverged";
      return res;
    }
    if (iter >= opts.max_iter || stalled >= 3) break;

    // Schur complement M_ik = tr(F_i Z F_k S^{-1}).
    schur.setZero();
    bool ok = true;
    for (std::size_t j = 0; j < nb && ok; ++j) {
      const BlockData& bd = blocks[j];
      Eigen::LLT<Eigen::MatrixXd> llt(res.S[j]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      sinv[j] = sym(llt.solve(Eigen::MatrixXd::Identity(bd.size, bd.size)));
      const Eigen::MatrixXd& z = res.Z[j];
      const Eigen::MatrixXd& si = sinv[j];
      // tr(F_a Z F_b S^{-1}) = <F_b, S^{-1} F_a Z>; the product is formed densely for long lists.
      for (std::size_t a = 0; a < bd.vars.size(); ++a) {
        const bool dense = bd.coefs[a].size() > static_cast<std::size_t>(2 * bd.size);
        Eigen::MatrixXd p;
        if (dense) {
          Eigen::MatrixXd f = Eigen::MatrixXd::Zero(bd.size, bd.size);
          for (const Coef& fa : bd.coefs[a]) f(fa.row, fa.col) += fa.value;
          p = si * f * z;
        }
        for (std::size_t b = a; b < bd.vars.size(); ++b) {
          double s = 0.0;
          if (dense) {
            s = inner(bd.coefs[b], p);
          } else {
            for (const Coef& fa : bd.coefs[a])
              for (const Coef& fb : bd.coefs[b]) s += fa.value * fb.value * z(fa.col, fb.row) * si(fb.col, fa.row);
          }
          schur(bd.vars[a], bd.vars[b]) += s;
          if (b != a) schur(bd.vars[b], bd.vars[a]) += s;
        }
      }
      zrds[j] = res.Z[j] * rd[j] * sinv[j];
    }
    if (!ok) {
      res.message = "slack lost definiteness";
      break;
    }
    schur = sym(schur);
    Eigen::LDLT<Eigen::MatrixXd> factor(schur);
    if (factor.info() != Eigen::Success) {
      res.message = "Schur complement factorization failed";
      break;
    }

    // Predictor (affine scaling).
    rhs = -c;
    for (std::size_t j = 0; j < nb; ++j) {
      const BlockData& bd = blocks[j];
      for (std::size_t a = 0; a < bd.vars.size(); ++a) rhs(bd.vars[a]) -= inner(bd.coefs[a], zrds[j]);
    }
    directions(rhs, 0.0, false, factor);
    double ap, ad;
    step_lengths(ap, ad);
    double mu_aff = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      dz_aff[j] = dz[j];
      ds_aff[j] = ds[j];
      mu_aff += ((res.Z[j] + ap * dz[j]).cwiseProduct(res.S[j] + ad * ds[j])).sum();
    }
    mu_aff /= n_total;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    // Corrector with centering and the second-order term dZ_aff dS_aff S^{-1}.
    Eigen::VectorXd rhs_c = rhs;
    for (std::size_t j = 0; j < nb; ++j) {
      const BlockData& bd = blocks[j];
      corr[j] = dz_aff[j] * ds_aff[j] * sinv[j];
      for (std::size_t a = 0; a < bd.vars.size(); ++a) {
        rhs_c(bd.vars[a]) += sigma * mu * inner(bd.coefs[a], sinv[j]) - inner(bd.coefs[a], corr[j]);
      }
    }
    directions(rhs_c, sigma * mu, true, factor);
    step_lengths(ap, ad);
    ap = ad = std::min(ap, ad);

    res.y += ad * dy;
    for (std::size_t j = 0; j < nb; ++j) {
      res.Z[j] = sym(res.Z[j] + ap * dz[j]);
      res.S[j] = sym(res.S[j] + ad * ds[j]);
    }
    last_ap = ap;
    last_ad = ad;
    stalled = (ap < 1e-8 && ad < 1e-8) ? stalled + 1 : 0;
  }

  const bool close = res.rel_gap <= 1e-3 && res.primal_infeasibility <= 1e-6 &&
                     res.dual_infeasibility <= 1e-6;
  res.status = close ? LmiStatus::Inaccurate : LmiStatus::Error;
  if (res.message.empty()) res.message = "iteration limit reached";
  return res;
}

}  // namespace drc
