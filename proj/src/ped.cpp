#include "longmix/ped.hpp"

#include <cmath>

#include "longmix/threading.hpp"

namespace longmix {

Eigen::MatrixXd subject_loglik_matrix(const ChainSample& sample,
                                      const ValidatedDataset& data,
                                      const MargLikOptions& opts) {
  int N = sample.N;
  int M = static_cast<int>(sample.draws.rows());
  Eigen::MatrixXd out(N, M);
  parallel_for(M, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      MixtureParams mix = sample.mixture_at(static_cast<int>(m));
      GlmmParams glmm = sample.glmm_at(static_cast<int>(m), data);
      for (int i = 0; i < N; ++i) {
        out(i, static_cast<int>(m)) = log_mixture_marglik(
            data, i, glmm, mix, opts, static_cast<std::uint32_t>(m));
      }
    }
  });
  return out;
}

namespace {

// Posterior-mean parameters of one chain (weights stay normalized because
// every draw is).
void mean_params(const ChainSample& sample, const ValidatedDataset& data,
                 MixtureParams* mix, GlmmParams* glmm) {
  Eigen::RowVectorXd mean = sample.draws.colwise().mean();
  const ParamLayout& lay = sample.layout;
  int K = sample.K, q = sample.q;
  Eigen::VectorXd w(K);
  std::vector<Eigen::VectorXd> mu(K);
  std::vector<SpdMatrix> d(K);
  for (int k = 0; k < K; ++k) {
    w[k] = mean[lay.w_index(k)];
    mu[k].resize(q);
    for (int j = 0; j < q; ++j) mu[k][j] = mean[lay.mu_index(k, j)];
    Eigen::VectorXd v(lay.vech_len());
    for (int t = 0; t < lay.vech_len(); ++t) v[t] = mean[lay.d_index(k) + t];
    d[k] = SpdMatrix::from_matrix(unvech(v));
  }
  *mix = MixtureParams::create(std::move(w), std::move(mu), std::move(d));
  glmm->alpha.resize(data.n_markers());
  glmm->phi.assign(data.n_markers(), 1.0);
  for (int r = 0; r < data.n_markers(); ++r) {
    int p = data.p_r(r);
    glmm->alpha[r].resize(p);
    for (int c = 0; c < p; ++c) {
      glmm->alpha[r][c] = mean[lay.alpha_index(r) + c];
    }
    if (data.marker(r).family == Family::gaussian) {
      glmm->phi[r] = mean[lay.phi_index(r)];
    }
  }
}

}  // namespace

PedRecord penalized_expected_deviance(const ChainSample& chain_a,
                                      const ChainSample& chain_b,
                                      const ValidatedDataset& data,
                                      const MargLikOptions& opts) {
  if (chain_a.K != chain_b.K || chain_a.q != chain_b.q ||
      chain_a.N != chain_b.N) {
    throw ValidationError("ped: the two chains fit different models");
  }
  if (chain_a.draws.rows() != chain_b.draws.rows()) {
    throw ValidationError("ped: the two chains store different draw counts");
  }
  int N = chain_a.N;
  int M = static_cast<int>(chain_a.draws.rows());

  Eigen::MatrixXd ell_a = subject_loglik_matrix(chain_a, data, opts);
  Eigen::MatrixXd ell_b = subject_loglik_matrix(chain_b, data, opts);

  // Expected deviance and its Monte Carlo error, chain by chain.
  Eigen::VectorXd dev_a = -2.0 * ell_a.colwise().sum();
  Eigen::VectorXd dev_b = -2.0 * ell_b.colwise().sum();
  double dbar_a = dev_a.mean();
  double dbar_b = dev_b.mean();
  double expected_dev = 0.5 * (dbar_a + dbar_b);
  double var_a = (dev_a.array() - dbar_a).square().sum() / std::max(M - 1, 1);
  double var_b = (dev_b.array() - dbar_b).square().sum() / std::max(M - 1, 1);
  double mc_se = 0.5 * std::sqrt(var_a / M + var_b / M);

  // Per-subject optimism via importance weights 1/L_i; the weights are
  // stabilized per subject by the largest log weight across both chains.
  double p_opt = 0.0;
  int degenerate = 0;
  double ess_floor = 0.01 * M;
  for (int i = 0; i < N; ++i) {
    double c = -std::numeric_limits<double>::infinity();
    bool finite = true;
    for (int m = 0; m < M; ++m) {
      if (!std::isfinite(ell_a(i, m)) || !std::isfinite(ell_b(i, m))) {
        finite = false;
        break;
      }
      c = std::max(c, std::max(-ell_a(i, m), -ell_b(i, m)));
    }
    if (!finite) {
      ++degenerate;
      continue;
    }
    double num = 0.0, den = 0.0;
    double sum_a = 0.0, sum2_a = 0.0, sum_b = 0.0, sum2_b = 0.0;
    for (int m = 0; m < M; ++m) {
      double va = std::exp(-ell_a(i, m) - c);
      double vb = std::exp(-ell_b(i, m) - c);
      double da = -2.0 * ell_a(i, m);
      double db = -2.0 * ell_b(i, m);
      num += 0.5 * (da - db) * (va - vb);
      den += 0.5 * (va + vb);
      sum_a += va;
      sum2_a += va * va;
      sum_b += vb;
      sum2_b += vb * vb;
    }
    double ess_a = sum2_a > 0.0 ? sum_a * sum_a / sum2_a : 0.0;
    double ess_b = sum2_b > 0.0 ? sum_b * sum_b / sum2_b : 0.0;
    if (std::min(ess_a, ess_b) < ess_floor || den <= 0.0) {
      ++degenerate;
      continue;
    }
    p_opt += num / den;
  }

  PedRecord rec;
  rec.K = chain_a.K;
  rec.expected_deviance = expected_dev;
  rec.mc_se = mc_se;
  rec.degenerate_subjects = degenerate;
  if (degenerate > 0) {
    // Importance weights are unreliable for at least one subject: fall back
    // to twice the classical effective-parameter count, chain-averaged.
    rec.estimator = "two_pd_fallback";
    double p_opt_fb = 0.0;
    for (const ChainSample* chain : {&chain_a, &chain_b}) {
      MixtureParams mix;
      GlmmParams glmm;
      mean_params(*chain, data, &mix, &glmm);
      double dev_at_mean = observed_deviance(
          data, glmm, mix, opts, static_cast<std::uint32_t>(M));
      double dbar = chain == &chain_a ? dbar_a : dbar_b;
      p_opt_fb += 2.0 * (dbar - dev_at_mean);
    }
    rec.p_opt = 0.5 * p_opt_fb;
  } else {
    rec.estimator = "importance";
    rec.p_opt = p_opt;
  }
  rec.ped = rec.expected_deviance + rec.p_opt;
  return rec;
}

int select_K(const std::vector<PedRecord>& records) {
  if (records.empty()) {
    throw ValidationError("select_K: no PED records");
  }
  int best_k = records[0].K;
  double best = records[0].ped;
  for (const PedRecord& r : records) {
    if (r.ped < best || (r.ped == best && r.K < best_k)) {
      best = r.ped;
      best_k = r.K;
    }
  }
  return best_k;
}

}  // namespace longmix
