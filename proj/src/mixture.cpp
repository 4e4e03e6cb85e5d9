#include "longmix/mixture.hpp"

#include <cmath>

#include "longmix/errors.hpp"
#include "longmix/stats.hpp"

namespace longmix {

MixtureParams MixtureParams::create(Eigen::VectorXd w,
                                    std::vector<Eigen::VectorXd> mu,
                                    std::vector<SpdMatrix> d) {
  int K = static_cast<int>(w.size());
  if (K < 1) throw ValidationError("mixture: needs at least one component");
  if (static_cast<int>(mu.size()) != K || static_cast<int>(d.size()) != K) {
    throw ValidationError("mixture: w, mu, d must have equal length");
  }
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    if (!(w[k] >= 0.0) || !std::isfinite(w[k])) {
      throw ValidationError("mixture: weights must be finite and >= 0");
    }
    total += w[k];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("mixture: weights sum to " + std::to_string(total) +
                          ", expected 1");
  }
  int q = static_cast<int>(mu[0].size());
  for (int k = 0; k < K; ++k) {
    if (mu[k].size() != q || d[k].dim() != q) {
      throw ValidationError("mixture: inconsistent dimensions across components");
    }
    if (!mu[k].allFinite()) {
      throw ValidationError("mixture: non-finite component mean");
    }
  }
  MixtureParams out;
  out.w = w / total;
  out.mu = std::move(mu);
  out.d = std::move(d);
  return out;
}

double log_mixture_density(const Eigen::VectorXd& b,
                           const MixtureParams& mix) {
  int K = mix.n_components();
  Eigen::VectorXd terms(K);
  for (int k = 0; k < K; ++k) {
    terms[k] = mix.w[k] > 0.0
                   ? std::log(mix.w[k]) + log_mvn_pdf(b, mix.mu[k], mix.d[k])
                   : -std::numeric_limits<double>::infinity();
  }
  return log_sum_exp(terms);
}

Eigen::VectorXd conditional_allocation_probs(const Eigen::VectorXd& b,
                                             const MixtureParams& mix) {
  int K = mix.n_components();
  Eigen::VectorXd logp(K);
  for (int k = 0; k < K; ++k) {
    logp[k] = mix.w[k] > 0.0
                  ? std::log(mix.w[k]) + log_mvn_pdf(b, mix.mu[k], mix.d[k])
                  : -std::numeric_limits<double>::infinity();
  }
  double lse = log_sum_exp(logp);
  Eigen::VectorXd out(K);
  if (!std::isfinite(lse)) {
    // every component vanished at b; fall back to the weights
    for (int k = 0; k < K; ++k) out[k] = mix.w[k];
    return out;
  }
  for (int k = 0; k < K; ++k) out[k] = std::exp(logp[k] - lse);
  return out;
}

Eigen::VectorXd overall_fixed_effects(const MixtureParams& mix) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mix.dim());
  for (int k = 0; k < mix.n_components(); ++k) out += mix.w[k] * mix.mu[k];
  return out;
}

}  // namespace longmix
