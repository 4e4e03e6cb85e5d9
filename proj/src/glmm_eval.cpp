#include "longmix/glmm_eval.hpp"

namespace longmix {

double subject_loglik(const ValidatedDataset& data, int i,
                      const GlmmParams& glmm, const Eigen::VectorXd& b) {
  double out = 0.0;
  for (int r = 0; r < data.n_markers(); ++r) {
    int n = data.n_obs(i, r);
    if (n == 0) continue;
    Family fam = data.marker(r).family;
    double phi = glmm.phi[r];
    const Eigen::VectorXd& y = data.y(i, r);
    Eigen::VectorXd eta =
        data.z(i, r) * b.segment(data.q_offset(r), data.q_r(r));
    if (glmm.alpha[r].size() > 0) eta += data.x(i, r) * glmm.alpha[r];
    for (int j = 0; j < n; ++j) out += log_density(fam, y[j], eta[j], phi);
  }
  return out;
}

double subject_loglik_grad_neghess(const ValidatedDataset& data, int i,
                                   const GlmmParams& glmm,
                                   const Eigen::VectorXd& b,
                                   Eigen::VectorXd* grad,
                                   Eigen::MatrixXd* neg_hess) {
  int q = data.q();
  grad->setZero(q);
  neg_hess->setZero(q, q);
  double out = 0.0;
  for (int r = 0; r < data.n_markers(); ++r) {
    int n = data.n_obs(i, r);
    if (n == 0) continue;
    Family fam = data.marker(r).family;
    double phi = glmm.phi[r];
    int off = data.q_offset(r);
    int qr = data.q_r(r);
    const Eigen::VectorXd& y = data.y(i, r);
    const Eigen::MatrixXd& z = data.z(i, r);
    Eigen::VectorXd eta = z * b.segment(off, qr);
    if (glmm.alpha[r].size() > 0) eta += data.x(i, r) * glmm.alpha[r];
    for (int j = 0; j < n; ++j) {
      out += log_density(fam, y[j], eta[j], phi);
      double g1 = dlog_density(fam, y[j], eta[j], phi);
      double g2 = d2log_density(fam, y[j], eta[j], phi);
      grad->segment(off, qr) += g1 * z.row(j).transpose();
      neg_hess->block(off, off, qr, qr) -=
          g2 * (z.row(j).transpose() * z.row(j));
    }
  }
  return out;
}

double marker_loglik_alpha(const ValidatedDataset& data, int r,
                           const Eigen::VectorXd& alpha_r,
                           const Eigen::MatrixXd& b_all, double phi_r) {
  Family fam = data.marker(r).family;
  int off = data.q_offset(r);
  int qr = data.q_r(r);
  double out = 0.0;
  for (int i = 0; i < data.n_subjects(); ++i) {
    int n = data.n_obs(i, r);
    if (n == 0) continue;
    const Eigen::VectorXd& y = data.y(i, r);
    Eigen::VectorXd eta =
        data.z(i, r) * b_all.row(i).segment(off, qr).transpose();
    if (alpha_r.size() > 0) eta += data.x(i, r) * alpha_r;
    for (int j = 0; j < n; ++j) out += log_density(fam, y[j], eta[j], phi_r);
  }
  return out;
}

double marker_loglik_alpha_grad_neghess(const ValidatedDataset& data, int r,
                                        const Eigen::VectorXd& alpha_r,
                                        const Eigen::MatrixXd& b_all,
                                        double phi_r, Eigen::VectorXd* grad,
                                        Eigen::MatrixXd* neg_hess) {
  Family fam = data.marker(r).family;
  int off = data.q_offset(r);
  int qr = data.q_r(r);
  int p = static_cast<int>(alpha_r.size());
  grad->setZero(p);
  neg_hess->setZero(p, p);
  double out = 0.0;
  for (int i = 0; i < data.n_subjects(); ++i) {
    int n = data.n_obs(i, r);
    if (n == 0) continue;
    const Eigen::VectorXd& y = data.y(i, r);
    const Eigen::MatrixXd& x = data.x(i, r);
    Eigen::VectorXd eta =
        data.z(i, r) * b_all.row(i).segment(off, qr).transpose();
    if (p > 0) eta += x * alpha_r;
    for (int j = 0; j < n; ++j) {
      out += log_density(fam, y[j], eta[j], phi_r);
      double g1 = dlog_density(fam, y[j], eta[j], phi_r);
      double g2 = d2log_density(fam, y[j], eta[j], phi_r);
      *grad += g1 * x.row(j).transpose();
      *neg_hess -= g2 * (x.row(j).transpose() * x.row(j));
    }
  }
  return out;
}

}  // namespace longmix
