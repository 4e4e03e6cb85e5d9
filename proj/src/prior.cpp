#include "longmix/prior.hpp"

#include <cmath>
#include <sstream>

#include "longmix/stats.hpp"

namespace longmix {

PriorSpec default_hyperparameters(const Eigen::MatrixXd& crude_effects, int K,
                                  const PriorOverrides& overrides,
                                  std::vector<std::string>* warnings) {
  if (K < 1) throw ValidationError("prior: K must be >= 1");
  int q = static_cast<int>(crude_effects.cols());
  if (q < 1 || crude_effects.rows() < 1) {
    throw ValidationError("prior: crude effect matrix is empty");
  }

  PriorSpec spec;
  spec.xi.resize(q);
  spec.c_diag.resize(q);
  spec.h_rate.resize(q);
  for (int j = 0; j < q; ++j) {
    double lo = crude_effects.col(j).minCoeff();
    double hi = crude_effects.col(j).maxCoeff();
    double mid = 0.5 * (lo + hi);
    double range = hi - lo;
    if (!(range > 0.0) || !std::isfinite(range) || !std::isfinite(mid)) {
      if (warnings) {
        std::ostringstream w;
        w << "degenerate spread of crude random-effect estimates in "
             "dimension " << (j + 1) << "; using unit range for the prior";
        warnings->push_back(w.str());
      }
      range = 1.0;
      if (!std::isfinite(mid)) mid = 0.0;
    }
    spec.xi[j] = mid;
    spec.c_diag[j] = range * range;
    spec.h_rate[j] = 10.0 / (range * range);
  }
  spec.zeta = q + 1.0;

  if (overrides.delta) spec.delta = *overrides.delta;
  if (overrides.xi) {
    if (overrides.xi->size() != q) {
      throw ValidationError("prior override xi: wrong length");
    }
    spec.xi = *overrides.xi;
  }
  if (overrides.c_diag) {
    if (overrides.c_diag->size() != q) {
      throw ValidationError("prior override c_diag: wrong length");
    }
    spec.c_diag = *overrides.c_diag;
  }
  if (overrides.zeta) spec.zeta = *overrides.zeta;
  if (overrides.g_shape) spec.g_shape = *overrides.g_shape;
  if (overrides.h_rate) {
    if (overrides.h_rate->size() != q) {
      throw ValidationError("prior override h_rate: wrong length");
    }
    spec.h_rate = *overrides.h_rate;
  }
  if (overrides.alpha_var) spec.alpha_var = *overrides.alpha_var;
  if (overrides.phi_shape) spec.phi_shape = *overrides.phi_shape;
  if (overrides.phi_rate) spec.phi_rate = *overrides.phi_rate;

  if (!(spec.delta > 0.0)) throw ValidationError("prior: delta must be > 0");
  if (!(spec.zeta > q - 1.0)) {
    throw ValidationError("prior: zeta must exceed q - 1");
  }
  if (!(spec.g_shape > 0.0) || (spec.h_rate.array() <= 0.0).any() ||
      (spec.c_diag.array() <= 0.0).any()) {
    throw ValidationError("prior: scale hyperparameters must be positive");
  }
  if (!(spec.alpha_var > 0.0) || !(spec.phi_shape > 0.0) ||
      !(spec.phi_rate > 0.0)) {
    throw ValidationError("prior: GLMM hyperparameters must be positive");
  }
  return spec;
}

double log_prior(const ValidatedDataset& data, const MixtureParams& mix,
                 const Eigen::VectorXd& xi_scale, const GlmmParams& glmm,
                 const PriorSpec& spec) {
  int K = mix.n_components();
  int q = mix.dim();

  double out = log_dirichlet_pdf(mix.w, spec.delta);

  // The Wishart prior sits on the precision: D_k^{-1} ~ W(zeta, Xi^{-1}).
  SpdMatrix xi_inv = SpdMatrix::diagonal(xi_scale.cwiseInverse());
  for (int k = 0; k < K; ++k) {
    out += log_mvn_diag_pdf(mix.mu[k], spec.xi, spec.c_diag);
    SpdMatrix prec = SpdMatrix::from_matrix(mix.d[k].inverse());
    out += log_wishart_pdf(prec, spec.zeta, xi_inv);
  }

  for (int j = 0; j < q; ++j) {
    out += log_gamma_pdf(xi_scale[j], spec.g_shape, spec.h_rate[j]);
  }

  for (int r = 0; r < data.n_markers(); ++r) {
    const Eigen::VectorXd& a = glmm.alpha[r];
    for (int c = 0; c < a.size(); ++c) {
      out += log_normal_pdf(a[c], 0.0, spec.alpha_var);
    }
    if (data.marker(r).family == Family::gaussian) {
      out += log_inv_gamma_pdf(glmm.phi[r], spec.phi_shape, spec.phi_rate);
    }
  }
  return out;
}

}  // namespace longmix
