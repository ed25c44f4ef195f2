#pragma once

#include <vector>

#include "fuse/association.hpp"
#include "fuse/screening.hpp"
#include "fuse/types.hpp"

namespace fuse {

enum class GateMode { kHard, kLinear };

struct GatingConfig {
  double lambda_thresh = 1.0;  // eigenvalue threshold (absolute)
  GateMode mode = GateMode::kLinear;
  bool enabled = true;  // disabled gating yields Gamma = I (ablation)
};

/// Spectral gate Gamma = V diag(gamma) V^T with gamma_i in [0, 1].
struct GatingResult {
  Mat23 gamma = Mat23::Identity();
  Vec23 eigvals = Vec23::Zero();  // descending; NaN marks unanalyzed dims
  Mat23 eigvecs = Mat23::Identity();
  std::vector<int> gated_dims;    // positions in eigvals with gamma < 1
};

/// Normal (information) matrix Lambda = sum_j w_j H_j^T H_j over the
/// admitted constraints, symmetrized. Empty admitted set yields zero.
Mat23 build_info_matrix(const ConstraintSet& cs, const AdmittedSet& admitted, const State& x);

/// Symmetric eigendecomposition of Lambda and the gating schedule:
/// hard: gamma_i = 1 if lambda_i >= thresh else 0; linear:
/// gamma_i = min(1, lambda_i / thresh); disabled: Gamma = I.
/// Eigenvalues are clamped at zero from below. Throws NumericalError when
/// the decomposition produces non-finite output.
GatingResult gate(const Mat23& lambda, const GatingConfig& cfg);

/// Same schedule restricted to the listed tangent dimensions; excluded
/// dimensions pass through the gate unattenuated (identity rows/columns).
GatingResult gate_restricted(const Mat23& lambda, const GatingConfig& cfg,
                             const std::vector<int>& active_dims);

/// delta_eff = Gamma * delta_star; never norm-expanding.
Vec23 apply_gate(const GatingResult& gr, const Vec23& delta_star);

}  // namespace fuse
