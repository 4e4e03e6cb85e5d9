#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "longmix/data.hpp"
#include "longmix/mixture.hpp"

namespace longmix {

// Hyperparameters of the hierarchical prior:
//   w            ~ Dirichlet(delta, ..., delta)
//   mu_k         ~ N(xi, diag(c_diag))                 (independent over k)
//   D_k^{-1}     ~ Wishart(zeta, Xi^{-1}),  Xi = diag(xi_scale)
//   xi_scale_j   ~ Gamma(g_shape, h_rate_j)
//   alpha_r      ~ N(0, alpha_var I)
//   phi_r        ~ InvGamma(phi_shape, phi_rate)       (gaussian markers)
struct PriorSpec {
  double delta = 1.0;
  Eigen::VectorXd xi;
  Eigen::VectorXd c_diag;
  double zeta = 0.0;
  double g_shape = 0.2;
  Eigen::VectorXd h_rate;
  double alpha_var = 1e4;
  double phi_shape = 1.0;
  double phi_rate = 0.005;
};

// Optional user overrides of individual hyperparameters; anything left unset
// is filled in by default_hyperparameters.
struct PriorOverrides {
  std::optional<double> delta;
  std::optional<Eigen::VectorXd> xi;
  std::optional<Eigen::VectorXd> c_diag;
  std::optional<double> zeta;
  std::optional<double> g_shape;
  std::optional<Eigen::VectorXd> h_rate;
  std::optional<double> alpha_var;
  std::optional<double> phi_shape;
  std::optional<double> phi_rate;
};

// Data-driven defaults built from crude per-subject random-effect estimates
// (one row per subject): with m_j / M_j the column minima and maxima and
// R_j = M_j - m_j,
//   xi_j = (m_j + M_j) / 2,  c_diag_j = R_j^2,  zeta = q + 1,
//   g_shape = 0.2,           h_rate_j = 10 / R_j^2.
// A degenerate range (zero or non-finite) falls back to R_j = 1 and appends
// a warning.  Overrides win over defaults field by field.
PriorSpec default_hyperparameters(const Eigen::MatrixXd& crude_effects, int K,
                                  const PriorOverrides& overrides,
                                  std::vector<std::string>* warnings);

// Joint log prior density of (w, mu, D, xi_scale, alpha, phi) under spec.
// The dataset supplies the marker layout (which markers carry alpha / phi).
double log_prior(const ValidatedDataset& data, const MixtureParams& mix,
                 const Eigen::VectorXd& xi_scale, const GlmmParams& glmm,
                 const PriorSpec& spec);

}  // namespace longmix
