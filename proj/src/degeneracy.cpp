#include "fuse/degeneracy.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "fuse/errors.hpp"

namespace fuse {

Mat23 build_info_matrix(const ConstraintSet& cs, const AdmittedSet& admitted, const State& x) {
  Mat23 lambda = Mat23::Zero();
  for (std::uint32_t j : admitted.indices) {
    const Constraint& c = cs.constraints[j];
    const auto [r, H] = residual_and_jacobian(c, x);
    (void)r;
    lambda.noalias() += c.w * H.transpose() * H;
  }
  return 0.5 * (lambda + lambda.transpose());
}

namespace {

double gamma_of(double eigval, const GatingConfig& cfg) {
  if (cfg.mode == GateMode::kHard) {
    return eigval >= cfg.lambda_thresh ? 1.0 : 0.0;
  }
  return std::min(1.0, eigval / cfg.lambda_thresh);
}

}  // namespace

GatingResult gate(const Mat23& lambda, const GatingConfig& cfg) {
  GatingResult out;
  if (!cfg.enabled) {
    out.eigvals.setConstant(std::numeric_limits<double>::quiet_NaN());
    return out;  // Gamma = I, eigvecs = I
  }

  const Mat23 sym = 0.5 * (lambda + lambda.transpose());
  Eigen::SelfAdjointEigenSolver<Mat23> eig(sym);
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite()) {
    throw NumericalError("gate: eigendecomposition failed");
  }

  // Reverse to descending order, clamp negatives to zero.
  for (int i = 0; i < kTangentDim; ++i) {
    out.eigvals(i) = std::max(0.0, eig.eigenvalues()(kTangentDim - 1 - i));
    out.eigvecs.col(i) = eig.eigenvectors().col(kTangentDim - 1 - i);
  }

  Vec23 gammas;
  for (int i = 0; i < kTangentDim; ++i) {
    gammas(i) = gamma_of(out.eigvals(i), cfg);
    if (gammas(i) < 1.0) out.gated_dims.push_back(i);
  }
  out.gamma = out.eigvecs * gammas.asDiagonal() * out.eigvecs.transpose();
  out.gamma = 0.5 * (out.gamma + out.gamma.transpose());
  return out;
}

GatingResult gate_restricted(const Mat23& lambda, const GatingConfig& cfg,
                             const std::vector<int>& active_dims) {
  GatingResult out;
  out.eigvals.setConstant(std::numeric_limits<double>::quiet_NaN());
  if (!cfg.enabled || active_dims.empty()) return out;

  const int n = static_cast<int>(active_dims.size());
  MatX sub(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      sub(i, j) = lambda(active_dims[i], active_dims[j]);
    }
  }
  sub = 0.5 * (sub + sub.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> eig(sub);
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite()) {
    throw NumericalError("gate_restricted: eigendecomposition failed");
  }

  VecX gammas(n);
  for (int i = 0; i < n; ++i) {
    const double ev = std::max(0.0, eig.eigenvalues()(n - 1 - i));
    out.eigvals(i) = ev;
    gammas(i) = gamma_of(ev, cfg);
    if (gammas(i) < 1.0) out.gated_dims.push_back(i);
  }
  MatX vec_desc(n, n);
  for (int i = 0; i < n; ++i) vec_desc.col(i) = eig.eigenvectors().col(n - 1 - i);
  const MatX sub_gamma = vec_desc * gammas.asDiagonal() * vec_desc.transpose();

  // Re-embed: identity on excluded dims, spectral gate on the active block.
  out.eigvecs = Mat23::Zero();
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < n; ++r) out.eigvecs(active_dims[r], i) = vec_desc(r, i);
  }
  out.gamma = Mat23::Identity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out.gamma(active_dims[i], active_dims[j]) =
          0.5 * (sub_gamma(i, j) + sub_gamma(j, i));
    }
  }
  return out;
}

Vec23 apply_gate(const GatingResult& gr, const Vec23& delta_star) {
  return gr.gamma * delta_star;
}

}  // namespace fuse
