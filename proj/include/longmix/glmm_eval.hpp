#pragma once

#include <Eigen/Dense>

#include "longmix/data.hpp"
#include "longmix/mixture.hpp"

namespace longmix {

// Data log likelihood of subject i: sum over markers and observations of
// log p(y | eta, phi) with eta = x' alpha_r + z' b_block.
double subject_loglik(const ValidatedDataset& data, int i,
                      const GlmmParams& glmm, const Eigen::VectorXd& b);

// Same value, plus gradient and negative Hessian with respect to b.
// grad/neg_hess must be sized q and q x q; they are overwritten.
double subject_loglik_grad_neghess(const ValidatedDataset& data, int i,
                                   const GlmmParams& glmm,
                                   const Eigen::VectorXd& b,
                                   Eigen::VectorXd* grad,
                                   Eigen::MatrixXd* neg_hess);

// Log likelihood of all observations of marker r as a function of alpha_r,
// holding every subject's random effects fixed (b_all is N x q).
double marker_loglik_alpha(const ValidatedDataset& data, int r,
                           const Eigen::VectorXd& alpha_r,
                           const Eigen::MatrixXd& b_all, double phi_r);

double marker_loglik_alpha_grad_neghess(const ValidatedDataset& data, int r,
                                        const Eigen::VectorXd& alpha_r,
                                        const Eigen::MatrixXd& b_all,
                                        double phi_r, Eigen::VectorXd* grad,
                                        Eigen::MatrixXd* neg_hess);

}  // namespace longmix
