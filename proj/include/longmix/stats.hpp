#pragma once

#include <Eigen/Dense>
#include <vector>

#include "longmix/linalg.hpp"
#include "longmix/rng.hpp"

namespace longmix {

// ---- log densities ----

double log_normal_pdf(double x, double mean, double var);
// Gamma(shape, rate): density rate^shape / Gamma(shape) * x^{shape-1} e^{-rate x}
double log_gamma_pdf(double x, double shape, double rate);
// InvGamma(shape, rate): density rate^shape / Gamma(shape) * x^{-shape-1} e^{-rate / x}
double log_inv_gamma_pdf(double x, double shape, double rate);
double log_dirichlet_pdf(const Eigen::VectorXd& w, double conc);
double log_dirichlet_pdf(const Eigen::VectorXd& w, const Eigen::VectorXd& conc);
double log_mvn_diag_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                        const Eigen::VectorXd& var_diag);
double log_mvn_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                   const SpdMatrix& cov);
// log of the multivariate gamma function Gamma_q(a)
double log_multi_gamma(int q, double a);
// X ~ Wishart(df, scale); X and scale both positive definite, df > q - 1.
double log_wishart_pdf(const SpdMatrix& x, double df, const SpdMatrix& scale);

// ---- draws ----

// mean + chol_lower * z
Eigen::VectorXd draw_mvn(RngStream& rng, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& chol_lower);
// Draw from N(mean, P^{-1}) given the lower Cholesky factor of the
// precision P: mean + solve(L', z).
Eigen::VectorXd draw_mvn_prec(RngStream& rng, const Eigen::VectorXd& mean,
                              const Eigen::MatrixXd& chol_prec_lower);
// Shifted/scaled multivariate t: mean + chol_scale * z / sqrt(chi2(df)/df)
Eigen::VectorXd draw_mvt(RngStream& rng, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& chol_scale, double df);
// Bartlett decomposition; returns a draw from Wishart(df, scale).
Eigen::MatrixXd draw_wishart(RngStream& rng, double df, const SpdMatrix& scale);
Eigen::VectorXd draw_dirichlet(RngStream& rng, const Eigen::VectorXd& conc);

}  // namespace longmix
