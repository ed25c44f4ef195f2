#include "fuse/backends.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fuse/errors.hpp"

namespace fuse {

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "eskf") return BackendKind::kEskf;
  if (s == "ieskf") return BackendKind::kIeskf;
  if (s == "nano") return BackendKind::kNano;
  throw ConfigError("unknown backend kind: " + s);
}

std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::kEskf: return "eskf";
    case BackendKind::kIeskf: return "ieskf";
    case BackendKind::kNano: return "nano";
  }
  return "?";
}

void BackendConfig::validate() const {
  if (max_iters < 1) throw ConfigError("backend.max_iters must be >= 1");
  if (!(conv_tol > 0.0)) throw ConfigError("backend.conv_tol must be positive");
  if (!(nano_step > 0.0 && nano_step <= 1.0)) {
    throw ConfigError("backend.nano_step must lie in (0, 1]");
  }
}

void stack_residuals(const ConstraintSet& cs, const AdmittedSet& admitted, const State& x,
                     VecX& r, MatX23& H) {
  const auto m = static_cast<Eigen::Index>(admitted.indices.size());
  r.resize(m);
  H.resize(m, kTangentDim);
  for (Eigen::Index row = 0; row < m; ++row) {
    const Constraint& c = cs.constraints[admitted.indices[row]];
    const auto [rj, Hj] = residual_and_jacobian(c, x);
    r(row) = rj;
    H.row(row) = Hj;
  }
}

namespace {

std::vector<int> active_dims_of(const BlockMask& freeze) {
  const auto mask = expand_mask(freeze);
  std::vector<int> dims;
  dims.reserve(kTangentDim);
  for (int i = 0; i < kTangentDim; ++i) {
    if (!mask[i]) dims.push_back(i);
  }
  return dims;
}

MatX select_cols(const MatX23& H, const std::vector<int>& dims) {
  MatX out(H.rows(), static_cast<Eigen::Index>(dims.size()));
  for (std::size_t j = 0; j < dims.size(); ++j) out.col(j) = H.col(dims[j]);
  return out;
}

MatX select_block(const Mat23& P, const std::vector<int>& dims) {
  MatX out(dims.size(), dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    for (std::size_t j = 0; j < dims.size(); ++j) out(i, j) = P(dims[i], dims[j]);
  }
  return out;
}

Vec23 embed(const VecX& v, const std::vector<int>& dims) {
  Vec23 out = Vec23::Zero();
  for (std::size_t i = 0; i < dims.size(); ++i) out(dims[i]) = v(i);
  return out;
}

void write_block(Mat23& P, const MatX& sub, const std::vector<int>& dims) {
  for (std::size_t i = 0; i < dims.size(); ++i) {
    for (std::size_t j = 0; j < dims.size(); ++j) P(dims[i], dims[j]) = sub(i, j);
  }
}

MatX gate_block(const GatingResult& gr, const std::vector<int>& dims) {
  MatX out(dims.size(), dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    for (std::size_t j = 0; j < dims.size(); ++j) out(i, j) = gr.gamma(dims[i], dims[j]);
  }
  return out;
}

void check_finite(const MatX& m, const char* where) {
  if (!m.allFinite()) throw NumericalError(std::string(where) + ": non-finite intermediate");
}

/// Shared ESKF/IESKF core. max_iters = 1 is exactly the single-shot ESKF.
UpdateResult iterated_update(const GaussianBelief& belief, const UpdateBatch& batch,
                             const BackendConfig& cfg, int max_iters) {
  const std::vector<int> dims = active_dims_of(cfg.freeze);
  const auto a = static_cast<Eigen::Index>(dims.size());
  const State& anchor = belief.mean;

  const MatX P = select_block(0.5 * (belief.cov + belief.cov.transpose()), dims);
  Eigen::LDLT<MatX> prior_ldlt(P);
  if (prior_ldlt.info() != Eigen::Success) {
    throw NumericalError("ieskf_update: prior covariance factorization failed");
  }
  const MatX prior_info = prior_ldlt.solve(MatX::Identity(a, a));
  const double inv_var = 1.0 / batch.meas_var;

  VecX delta = VecX::Zero(a);
  VecX r;
  MatX23 H_full;
  MatX H;
  MatX K;
  int iters = 0;
  bool converged = false;
  double prev_step = 0.0;
  int growth_streak = 0;

  for (int it = 0; it < max_iters; ++it) {
    ++iters;
    const State x_i = boxplus(anchor, embed(delta, dims));
    stack_residuals(batch.cs, batch.admitted, x_i, r, H_full);
    H = select_cols(H_full, dims);

    // Information-form gain: K = (P^-1 + H^T R^-1 H)^-1 H^T R^-1, identical
    // to P H^T (H P H^T + R)^-1 for SPD P, R.
    MatX info = prior_info + inv_var * H.transpose() * H;
    Eigen::LDLT<MatX> info_ldlt(info);
    if (info_ldlt.info() != Eigen::Success) {
      throw NumericalError("update: innovation information factorization failed");
    }
    K = info_ldlt.solve(inv_var * H.transpose());
    check_finite(K, "update");

    const VecX delta_new = K * (H * delta - r);
    const double step = (delta_new - delta).norm();
    delta = delta_new;
    if (step < cfg.conv_tol) {
      converged = true;
      break;
    }
    if (it > 0 && step > 2.0 * prev_step) {
      if (++growth_streak >= 3) {
        throw DivergedError("ieskf_update: step norm doubled for 3 straight iterations (iter " +
                            std::to_string(iters) + ")");
      }
    } else {
      growth_streak = 0;
    }
    prev_step = step;
  }
  if (max_iters == 1) converged = true;

  // Gate the converged increment; the gain used for the covariance is gated
  // the same way so that prior variance is preserved along gamma = 0
  // eigendirections.
  MatX K_eff = K;
  VecX delta_eff = delta;
  if (batch.gate.has_value()) {
    const MatX gamma = gate_block(*batch.gate, dims);
    K_eff = gamma * K;
    delta_eff = gamma * delta;
  }

  const MatX IKH = MatX::Identity(a, a) - K_eff * H;
  MatX post = IKH * P * IKH.transpose() + batch.meas_var * K_eff * K_eff.transpose();
  post = 0.5 * (post + post.transpose()).eval();
  check_finite(post, "update covariance");

  UpdateResult out;
  out.belief.mean = boxplus(anchor, embed(delta_eff, dims));
  out.belief.cov = belief.cov;
  write_block(out.belief.cov, post, dims);
  out.iterations = iters;
  out.converged = converged;
  return out;
}

double logdet_spd(const MatX& m) {
  Eigen::LDLT<MatX> ldlt(m);
  double out = 0.0;
  for (Eigen::Index i = 0; i < ldlt.vectorD().size(); ++i) {
    out += std::log(std::max(ldlt.vectorD()(i), 1e-300));
  }
  return out;
}

/// KL(N(mu, P) || N(0, P_prior)) + 0.5/var * (sum r^2 + tr(H^T H P)); the
/// second term is the expected negative log-likelihood under the linearized
/// residual model.
double kl_energy(const VecX& mu, const MatX& P, const MatX& prior_info, double prior_logdet,
                 const VecX& resid, const MatX& H, double inv_var) {
  const auto a = static_cast<double>(mu.size());
  const double tr_term = (prior_info * P).trace();
  const double maha = mu.dot(prior_info * mu);
  const double kl = 0.5 * (tr_term + maha - a + prior_logdet - logdet_spd(P));
  const double expected_nll =
      0.5 * inv_var * (resid.squaredNorm() + (H * P * H.transpose()).trace());
  return kl + expected_nll;
}

}  // namespace

UpdateResult eskf_update(const GaussianBelief& belief, const UpdateBatch& batch,
                         const BackendConfig& cfg) {
  return iterated_update(belief, batch, cfg, 1);
}

UpdateResult ieskf_update(const GaussianBelief& belief, const UpdateBatch& batch,
                          const BackendConfig& cfg) {
  return iterated_update(belief, batch, cfg, cfg.max_iters);
}

UpdateResult nano_update(const GaussianBelief& belief, const UpdateBatch& batch,
                         const BackendConfig& cfg) {
  const std::vector<int> dims = active_dims_of(cfg.freeze);
  const auto a = static_cast<Eigen::Index>(dims.size());
  const State& anchor = belief.mean;
  const double inv_var = 1.0 / batch.meas_var;

  const MatX P_prior = select_block(0.5 * (belief.cov + belief.cov.transpose()), dims);
  Eigen::LDLT<MatX> prior_ldlt(P_prior);
  if (prior_ldlt.info() != Eigen::Success) {
    throw NumericalError("nano_update: prior covariance factorization failed");
  }
  const MatX prior_info = prior_ldlt.solve(MatX::Identity(a, a));
  const double prior_logdet = logdet_spd(P_prior);

  VecX mu = VecX::Zero(a);
  MatX info = prior_info;  // natural-parameter iterate Lambda = P^-1
  VecX r;
  MatX23 H_full;

  // Energy at the starting point (mu = 0, P = P_prior).
  stack_residuals(batch.cs, batch.admitted, anchor, r, H_full);
  MatX H = select_cols(H_full, dims);
  double J_cur = kl_energy(mu, P_prior, prior_info, prior_logdet, r, H, inv_var);

  MatX P_cur = P_prior;
  int iters = 0;
  bool converged = false;
  int fail_streak = 0;

  for (int it = 0; it < cfg.max_iters; ++it) {
    ++iters;
    // Relinearize the likelihood at the running mean.
    const State x_mu = boxplus(anchor, embed(mu, dims));
    stack_residuals(batch.cs, batch.admitted, x_mu, r, H_full);
    H = select_cols(H_full, dims);

    const VecX grad_mu = prior_info * mu + inv_var * H.transpose() * r;
    const MatX info_target = prior_info + inv_var * H.transpose() * H;

    double beta = cfg.nano_step;
    bool accepted = false;
    VecX mu_new;
    MatX info_new;
    MatX P_new;
    double J_new = 0.0;
    for (int half = 0; half <= 8; ++half) {
      info_new = (1.0 - beta) * info + beta * info_target;
      Eigen::LDLT<MatX> ldlt(info_new);
      if (ldlt.info() == Eigen::Success) {
        P_new = ldlt.solve(MatX::Identity(a, a));
        P_new = 0.5 * (P_new + P_new.transpose()).eval();
        mu_new = mu - beta * (P_new * grad_mu);
        if (mu_new.allFinite() && P_new.allFinite()) {
          const State x_new = boxplus(anchor, embed(mu_new, dims));
          VecX r_new;
          MatX23 Hf_new;
          stack_residuals(batch.cs, batch.admitted, x_new, r_new, Hf_new);
          J_new = kl_energy(mu_new, P_new, prior_info, prior_logdet, r_new, H, inv_var);
          if (J_new <= J_cur + 1e-12) {
            accepted = true;
            break;
          }
        }
      }
      beta *= 0.5;
    }

    if (!accepted) {
      if (++fail_streak >= 5) {
        throw DivergedError("nano_update: energy non-decreasing with backtracking exhausted "
                            "(iter " + std::to_string(iters) + ")");
      }
      continue;
    }
    fail_streak = 0;

    const double step = (mu_new - mu).norm();
    mu = mu_new;
    info = info_new;
    P_cur = P_new;
    J_cur = J_new;
    if (step < cfg.conv_tol) {
      converged = true;
      break;
    }
  }

  VecX mu_eff = mu;
  MatX post = P_cur;
  if (batch.gate.has_value()) {
    const MatX gamma = gate_block(*batch.gate, dims);
    mu_eff = gamma * mu;
    // Spectral blend sqrt(Gamma) P* sqrt(Gamma) + sqrt(I-Gamma) P- sqrt(I-Gamma):
    // preserves prior variance exactly along gamma = 0 eigendirections.
    Eigen::SelfAdjointEigenSolver<MatX> geig(gamma);
    const VecX gvals = geig.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
    const MatX V = geig.eigenvectors();
    const MatX s_post = V * gvals.cwiseSqrt().asDiagonal() * V.transpose();
    const MatX s_prior =
        V * (VecX::Ones(a) - gvals).cwiseSqrt().asDiagonal() * V.transpose();
    post = s_post * P_cur * s_post + s_prior * P_prior * s_prior;
    post = 0.5 * (post + post.transpose()).eval();
  }
  check_finite(post, "nano_update covariance");

  UpdateResult out;
  out.belief.mean = boxplus(anchor, embed(mu_eff, dims));
  out.belief.cov = belief.cov;
  write_block(out.belief.cov, post, dims);
  out.iterations = iters;
  out.converged = converged;
  return out;
}

UpdateResult update(const GaussianBelief& belief, const UpdateBatch& batch,
                    const BackendConfig& cfg) {
  cfg.validate();
  if (batch.admitted.indices.empty()) {
    UpdateResult out;
    out.belief = belief;
    out.degenerate_scan = true;
    return out;
  }
  switch (cfg.kind) {
    case BackendKind::kEskf: return eskf_update(belief, batch, cfg);
    case BackendKind::kIeskf: return ieskf_update(belief, batch, cfg);
    case BackendKind::kNano: return nano_update(belief, batch, cfg);
  }
  throw ConfigError("update: unknown backend kind");
}

}  // namespace fuse
