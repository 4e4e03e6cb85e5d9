#include "longmix/linalg.hpp"

#include <cmath>
#include <sstream>

namespace longmix {

namespace {

bool try_llt(const Eigen::MatrixXd& m, Eigen::MatrixXd* chol) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  *chol = llt.matrixL();
  // LLT can report success on barely-indefinite input; insist on a strictly
  // positive, finite diagonal.
  for (int j = 0; j < chol->rows(); ++j) {
    double d = (*chol)(j, j);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
  }
  return true;
}

}  // namespace

SpdMatrix SpdMatrix::from_matrix(const Eigen::MatrixXd& m, double rel_jitter) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ValidationError("SpdMatrix: matrix must be square and non-empty");
  }
  if (!m.allFinite()) {
    throw NumericalError("SpdMatrix: non-finite entries");
  }
  SpdMatrix out;
  out.mat_ = 0.5 * (m + m.transpose());
  if (!try_llt(out.mat_, &out.chol_)) {
    double jitter = rel_jitter * out.mat_.trace() / out.mat_.rows();
    if (!(jitter > 0.0)) jitter = rel_jitter;
    out.mat_.diagonal().array() += jitter;
    out.jittered_ = true;
    if (!try_llt(out.mat_, &out.chol_)) {
      std::ostringstream msg;
      msg << "SpdMatrix: matrix of dimension " << m.rows()
          << " not positive definite after jitter " << jitter;
      throw NumericalError(msg.str());
    }
  }
  out.log_det_ = 2.0 * out.chol_.diagonal().array().log().sum();
  return out;
}

SpdMatrix SpdMatrix::identity(int q) {
  return from_matrix(Eigen::MatrixXd::Identity(q, q));
}

SpdMatrix SpdMatrix::diagonal(const Eigen::VectorXd& d) {
  return from_matrix(Eigen::MatrixXd(d.asDiagonal()));
}

Eigen::VectorXd SpdMatrix::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(rhs);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdMatrix::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd y = chol_.triangularView<Eigen::Lower>().solve(rhs);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double SpdMatrix::quad_form_inv(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(x);
  return y.squaredNorm();
}

Eigen::MatrixXd SpdMatrix::inverse() const {
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim(), dim());
  return solve(eye);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf/nan)
  double s = 0.0;
  for (int j = 0; j < v.size(); ++j) s += std::exp(v[j] - m);
  return m + std::log(s);
}

Eigen::VectorXd vech(const Eigen::MatrixXd& m) {
  int q = static_cast<int>(m.rows());
  Eigen::VectorXd out(q * (q + 1) / 2);
  int idx = 0;
  for (int j = 0; j < q; ++j) {
    for (int i = j; i < q; ++i) out[idx++] = m(i, j);
  }
  return out;
}

Eigen::MatrixXd unvech(const Eigen::VectorXd& v) {
  int len = static_cast<int>(v.size());
  int q = static_cast<int>((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0 + 0.5);
  if (q * (q + 1) / 2 != len) {
    throw ValidationError("unvech: length is not a triangular number");
  }
  Eigen::MatrixXd m(q, q);
  int idx = 0;
  for (int j = 0; j < q; ++j) {
    for (int i = j; i < q; ++i) {
      m(i, j) = v[idx];
      m(j, i) = v[idx];
      ++idx;
    }
  }
  return m;
}

}  // namespace longmix
