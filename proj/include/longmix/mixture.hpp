#pragma once

#include <Eigen/Dense>
#include <vector>

#include "longmix/linalg.hpp"

namespace longmix {

// Heteroscedastic K-component normal mixture on the random-effect vector.
// Invariants are enforced by create(): weights non-negative summing to one
// (within 1e-9, then renormalized exactly), equal dimensions everywhere,
// every covariance positive definite.
struct MixtureParams {
  Eigen::VectorXd w;
  std::vector<Eigen::VectorXd> mu;
  std::vector<SpdMatrix> d;

  static MixtureParams create(Eigen::VectorXd w,
                              std::vector<Eigen::VectorXd> mu,
                              std::vector<SpdMatrix> d);

  int n_components() const { return static_cast<int>(w.size()); }
  int dim() const { return mu.empty() ? 0 : static_cast<int>(mu[0].size()); }
};

// GLMM parameters psi: per-marker fixed effects (possibly empty) and
// gaussian dispersions (ignored for other families, kept at 1).
struct GlmmParams {
  std::vector<Eigen::VectorXd> alpha;
  std::vector<double> phi;
};

// log sum_k w_k phi(b; mu_k, D_k)
double log_mixture_density(const Eigen::VectorXd& b, const MixtureParams& mix);

// P(u = k | b, theta) for all k; normalized.
Eigen::VectorXd conditional_allocation_probs(const Eigen::VectorXd& b,
                                             const MixtureParams& mix);

// Overall fixed effect of the random-effect design: sum_k w_k mu_k.
Eigen::VectorXd overall_fixed_effects(const MixtureParams& mix);

}  // namespace longmix
