#include "longmix/stats.hpp"

#include <cmath>

namespace longmix {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLogPi = 1.1447298858494001741434273513531;
}  // namespace

double log_normal_pdf(double x, double mean, double var) {
  double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * r * r / var;
}

double log_gamma_pdf(double x, double shape, double rate) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

double log_inv_gamma_pdf(double x, double shape, double rate) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - rate / x;
}

double log_dirichlet_pdf(const Eigen::VectorXd& w, double conc) {
  return log_dirichlet_pdf(
      w, Eigen::VectorXd::Constant(w.size(), conc).eval());
}

double log_dirichlet_pdf(const Eigen::VectorXd& w,
                         const Eigen::VectorXd& conc) {
  double out = std::lgamma(conc.sum());
  for (int k = 0; k < w.size(); ++k) {
    if (w[k] <= 0.0) return -std::numeric_limits<double>::infinity();
    out += (conc[k] - 1.0) * std::log(w[k]) - std::lgamma(conc[k]);
  }
  return out;
}

double log_mvn_diag_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                        const Eigen::VectorXd& var_diag) {
  double out = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    out += log_normal_pdf(x[j], mean[j], var_diag[j]);
  }
  return out;
}

double log_mvn_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                   const SpdMatrix& cov) {
  double q = static_cast<double>(x.size());
  return -0.5 * (q * kLog2Pi + cov.log_det() + cov.quad_form_inv(x - mean));
}

double log_multi_gamma(int q, double a) {
  double out = 0.25 * q * (q - 1) * kLogPi;
  for (int j = 0; j < q; ++j) out += std::lgamma(a - 0.5 * j);
  return out;
}

double log_wishart_pdf(const SpdMatrix& x, double df, const SpdMatrix& scale) {
  int q = x.dim();
  double tr = scale.solve(x.mat()).trace();
  return 0.5 * (df - q - 1.0) * x.log_det() - 0.5 * tr -
         0.5 * df * q * std::log(2.0) - 0.5 * df * scale.log_det() -
         log_multi_gamma(q, 0.5 * df);
}

Eigen::VectorXd draw_mvn(RngStream& rng, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& chol_lower) {
  Eigen::VectorXd z(mean.size());
  for (int j = 0; j < z.size(); ++j) z[j] = rng.normal();
  return mean + chol_lower.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd draw_mvn_prec(RngStream& rng, const Eigen::VectorXd& mean,
                              const Eigen::MatrixXd& chol_prec_lower) {
  Eigen::VectorXd z(mean.size());
  for (int j = 0; j < z.size(); ++j) z[j] = rng.normal();
  return mean + chol_prec_lower.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(z);
}

Eigen::VectorXd draw_mvt(RngStream& rng, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& chol_scale, double df) {
  Eigen::VectorXd z(mean.size());
  for (int j = 0; j < z.size(); ++j) z[j] = rng.normal();
  double s = rng.chi_square(df) / df;
  return mean +
         (chol_scale.triangularView<Eigen::Lower>() * z) / std::sqrt(s);
}

Eigen::MatrixXd draw_wishart(RngStream& rng, double df,
                             const SpdMatrix& scale) {
  int q = scale.dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, q);
  for (int j = 0; j < q; ++j) {
    a(j, j) = std::sqrt(rng.chi_square(df - j));
    for (int i = j + 1; i < q; ++i) a(i, j) = rng.normal();
  }
  Eigen::MatrixXd la = scale.chol_lower().triangularView<Eigen::Lower>() * a;
  return la * la.transpose();
}

Eigen::VectorXd draw_dirichlet(RngStream& rng, const Eigen::VectorXd& conc) {
  Eigen::VectorXd out(conc.size());
  for (int k = 0; k < conc.size(); ++k) out[k] = rng.gamma(conc[k]);
  return out / out.sum();
}

}  // namespace longmix
