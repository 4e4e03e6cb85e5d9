#pragma once

#include <Eigen/Dense>

#include "longmix/errors.hpp"

namespace longmix {

// Symmetric positive definite matrix bundled with its Cholesky factor and
// log determinant.  Construction is the single chokepoint where definiteness
// is enforced: if the factorization fails, a jitter of rel_jitter * trace / q
// is added to the diagonal once and the factorization retried; a second
// failure throws NumericalError.
class SpdMatrix {
 public:
  SpdMatrix() = default;

  static SpdMatrix from_matrix(const Eigen::MatrixXd& m,
                               double rel_jitter = 1e-10);
  static SpdMatrix identity(int q);
  static SpdMatrix diagonal(const Eigen::VectorXd& d);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Eigen::MatrixXd& mat() const { return mat_; }
  const Eigen::MatrixXd& chol_lower() const { return chol_; }
  double log_det() const { return log_det_; }
  bool jitter_applied() const { return jittered_; }

  // mat^{-1} * rhs
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  // x' mat^{-1} x
  double quad_form_inv(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::MatrixXd mat_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
  bool jittered_ = false;
};

// log(sum_j exp(v_j)) computed stably; returns -inf for an all -inf input.
double log_sum_exp(const Eigen::VectorXd& v);

// Lower triangle stacked column by column: (1,1),(2,1),...,(q,1),(2,2),...
Eigen::VectorXd vech(const Eigen::MatrixXd& m);
Eigen::MatrixXd unvech(const Eigen::VectorXd& v);

}  // namespace longmix
