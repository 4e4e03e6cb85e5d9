#include "longmix/marglik.hpp"

#include <cmath>

#include "longmix/glmm_eval.hpp"
#include "longmix/linalg.hpp"
#include "longmix/rng.hpp"
#include "longmix/stats.hpp"

namespace longmix {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

MargLikMethod marglik_method_from_string(const std::string& s) {
  if (s == "closed_form") return MargLikMethod::closed_form;
  if (s == "laplace") return MargLikMethod::laplace;
  if (s == "mc") return MargLikMethod::mc;
  throw ValidationError("unknown marginal likelihood method '" + s +
                        "' (expected closed_form, laplace, or mc)");
}

std::string marglik_method_to_string(MargLikMethod m) {
  switch (m) {
    case MargLikMethod::closed_form: return "closed_form";
    case MargLikMethod::laplace: return "laplace";
    case MargLikMethod::mc: return "mc";
  }
  return "?";
}

double gaussian_closed_form(const ValidatedDataset& data, int i, int k,
                            const GlmmParams& glmm, const MixtureParams& mix) {
  if (!data.subject_all_gaussian(i)) {
    throw ValidationError(
        "closed-form marginal likelihood requires all-gaussian observations "
        "(subject '" + data.subject_id(i) + "')");
  }
  // Stack the subject's observations: y ~ N(m, Z D Z' + diag(phi)) with
  // m = X alpha + Z mu_k and Z the block design over all markers.
  int n = data.n_obs(i);
  int q = data.q();
  Eigen::VectorXd resid(n);
  Eigen::MatrixXd z_full = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd noise(n);
  int row = 0;
  for (int r = 0; r < data.n_markers(); ++r) {
    int nr = data.n_obs(i, r);
    if (nr == 0) continue;
    const Eigen::MatrixXd& z = data.z(i, r);
    Eigen::VectorXd mean_r =
        z * mix.mu[k].segment(data.q_offset(r), data.q_r(r));
    if (glmm.alpha[r].size() > 0) mean_r += data.x(i, r) * glmm.alpha[r];
    resid.segment(row, nr) = data.y(i, r) - mean_r;
    z_full.block(row, data.q_offset(r), nr, data.q_r(r)) = z;
    noise.segment(row, nr).setConstant(glmm.phi[r]);
    row += nr;
  }
  Eigen::MatrixXd cov = z_full * mix.d[k].mat() * z_full.transpose();
  cov.diagonal() += noise;
  SpdMatrix s = SpdMatrix::from_matrix(cov);
  return -0.5 * (n * kLog2Pi + s.log_det() + s.quad_form_inv(resid));
}

namespace {

// Mode of f(b) = log p(y_i | b) + log phi(b; mu_k, D_k) by damped Newton
// from mu_k.  Returns false if the gradient tolerance was not reached.
bool find_mode(const ValidatedDataset& data, int i, int k,
               const GlmmParams& glmm, const MixtureParams& mix,
               const MargLikOptions& opts, Eigen::VectorXd* b_hat,
               double* f_at_mode, SpdMatrix* neg_hess_total) {
  int q = data.q();
  const Eigen::VectorXd& mu = mix.mu[k];
  const SpdMatrix& d = mix.d[k];

  Eigen::VectorXd b = mu;
  Eigen::VectorXd grad(q);
  Eigen::MatrixXd nh(q, q);
  double f = subject_loglik_grad_neghess(data, i, glmm, b, &grad, &nh);
  f += log_mvn_pdf(b, mu, d);

  Eigen::MatrixXd d_inv = d.inverse();
  for (int iter = 0; iter < opts.laplace_max_iter; ++iter) {
    Eigen::VectorXd g_total = grad - d_inv * (b - mu);
    if (g_total.norm() <= opts.laplace_grad_tol) {
      *b_hat = b;
      *f_at_mode = f;
      *neg_hess_total = SpdMatrix::from_matrix(nh + d_inv);
      return true;
    }
    SpdMatrix h_total = SpdMatrix::from_matrix(nh + d_inv);
    Eigen::VectorXd step = h_total.solve(g_total);
    // Backtrack until the objective improves (it is concave, so the full
    // step almost always does).
    double scale = 1.0;
    for (int half = 0; half < 30; ++half) {
      Eigen::VectorXd b_new = b + scale * step;
      Eigen::VectorXd grad_new(q);
      Eigen::MatrixXd nh_new(q, q);
      double f_new =
          subject_loglik_grad_neghess(data, i, glmm, b_new, &grad_new, &nh_new);
      f_new += log_mvn_pdf(b_new, mu, d);
      if (std::isfinite(f_new) && f_new >= f - 1e-12) {
        b = b_new;
        f = f_new;
        grad = grad_new;
        nh = nh_new;
        break;
      }
      scale *= 0.5;
      if (half == 29) return false;
    }
  }
  // Accept a final iterate that already satisfies the tolerance.
  Eigen::VectorXd g_total = grad - d_inv * (b - mu);
  if (g_total.norm() <= opts.laplace_grad_tol) {
    *b_hat = b;
    *f_at_mode = f;
    *neg_hess_total = SpdMatrix::from_matrix(nh + d_inv);
    return true;
  }
  return false;
}

}  // namespace

double laplace_log_marginal(const ValidatedDataset& data, int i, int k,
                            const GlmmParams& glmm, const MixtureParams& mix,
                            const MargLikOptions& opts, std::uint32_t context) {
  Eigen::VectorXd b_hat;
  double f_mode = 0.0;
  SpdMatrix nh;
  if (!find_mode(data, i, k, glmm, mix, opts, &b_hat, &f_mode, &nh)) {
    if (opts.laplace_fallbacks) opts.laplace_fallbacks->fetch_add(1);
    return mc_log_marginal(data, i, k, glmm, mix, opts.mc_draws, opts.seed,
                           context);
  }
  double q = static_cast<double>(data.q());
  return f_mode + 0.5 * q * kLog2Pi - 0.5 * nh.log_det();
}

double mc_log_marginal(const ValidatedDataset& data, int i, int k,
                       const GlmmParams& glmm, const MixtureParams& mix,
                       int draws, std::uint64_t seed, std::uint32_t context,
                       double* se_out) {
  if (draws < 1) throw ValidationError("mc marginal likelihood: draws >= 1");
  int K = mix.n_components();
  RngStream rng(seed, rngtag::kMargLik, static_cast<std::uint32_t>(i),
                context * static_cast<std::uint32_t>(K) +
                    static_cast<std::uint32_t>(k));
  Eigen::VectorXd logs(draws);
  const Eigen::MatrixXd& chol = mix.d[k].chol_lower();
  for (int s = 0; s < draws; ++s) {
    Eigen::VectorXd b = draw_mvn(rng, mix.mu[k], chol);
    logs[s] = subject_loglik(data, i, glmm, b);
  }
  double lse = log_sum_exp(logs);
  double value = lse - std::log(static_cast<double>(draws));
  if (se_out) {
    // Delta method on the mean of the (stabilized) integrand values.
    double m = logs.maxCoeff();
    if (!std::isfinite(m)) {
      *se_out = std::numeric_limits<double>::infinity();
    } else {
      Eigen::ArrayXd v = (logs.array() - m).exp();
      double mean = v.mean();
      double var = (v - mean).square().sum() / (draws - 1.0);
      *se_out = std::sqrt(var / draws) / mean;
    }
  }
  return value;
}

double component_log_marglik(const ValidatedDataset& data, int i, int k,
                             const GlmmParams& glmm, const MixtureParams& mix,
                             const MargLikOptions& opts,
                             std::uint32_t context) {
  switch (opts.method) {
    case MargLikMethod::closed_form:
      return gaussian_closed_form(data, i, k, glmm, mix);
    case MargLikMethod::laplace:
      return laplace_log_marginal(data, i, k, glmm, mix, opts, context);
    case MargLikMethod::mc:
      return mc_log_marginal(data, i, k, glmm, mix, opts.mc_draws, opts.seed,
                             context);
  }
  return 0.0;
}

double log_mixture_marglik(const ValidatedDataset& data, int i,
                           const GlmmParams& glmm, const MixtureParams& mix,
                           const MargLikOptions& opts, std::uint32_t context) {
  int K = mix.n_components();
  Eigen::VectorXd terms(K);
  for (int k = 0; k < K; ++k) {
    terms[k] =
        mix.w[k] > 0.0
            ? std::log(mix.w[k]) +
                  component_log_marglik(data, i, k, glmm, mix, opts, context)
            : -std::numeric_limits<double>::infinity();
  }
  return log_sum_exp(terms);
}

double observed_deviance(const ValidatedDataset& data, const GlmmParams& glmm,
                         const MixtureParams& mix, const MargLikOptions& opts,
                         std::uint32_t context) {
  double total = 0.0;
  for (int i = 0; i < data.n_subjects(); ++i) {
    total += log_mixture_marglik(data, i, glmm, mix, opts, context);
  }
  return -2.0 * total;
}

}  // namespace longmix
