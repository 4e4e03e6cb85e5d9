#include "longmix/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "longmix/threading.hpp"

namespace longmix {

namespace {

std::vector<int> assignment_exhaustive(const Eigen::MatrixXd& cost) {
  int n = static_cast<int>(cost.rows());
  std::vector<int> perm(n), best(n);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_total = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int a = 0; a < n; ++a) total += cost(a, perm[a]);
    if (total < best_total) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// O(n^3) assignment with row/column potentials.
std::vector<int> assignment_hungarian(const Eigen::MatrixXd& cost) {
  int n = static_cast<int>(cost.rows());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) perm[p[j] - 1] = j - 1;
  }
  return perm;
}

inline double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

}  // namespace

std::vector<int> assignment_min_cost(const Eigen::MatrixXd& cost,
                                     bool force_hungarian) {
  if (cost.rows() != cost.cols() || cost.rows() == 0) {
    throw ValidationError("assignment: cost matrix must be square");
  }
  if (!cost.allFinite()) {
    throw NumericalError("assignment: non-finite costs");
  }
  if (!force_hungarian && cost.rows() <= 6) {
    return assignment_exhaustive(cost);
  }
  return assignment_hungarian(cost);
}

std::vector<std::vector<int>> stephens_relabel(const AllocProbs& probs,
                                               int max_rounds) {
  int N = probs.N, K = probs.K, M = probs.M;
  std::vector<std::vector<int>> perms(M, std::vector<int>(K));
  for (int m = 0; m < M; ++m) {
    std::iota(perms[m].begin(), perms[m].end(), 0);
  }
  if (K == 1) return perms;

  Eigen::MatrixXd q_bar(N, K);
  Eigen::MatrixXd cost(K, K);
  for (int round = 0; round < max_rounds; ++round) {
    q_bar.setZero();
    for (int m = 0; m < M; ++m) {
      const std::vector<int>& perm = perms[m];
      for (int i = 0; i < N; ++i) {
        for (int k = 0; k < K; ++k) {
          q_bar(i, k) += probs.at(i, perm[k], m);
        }
      }
    }
    q_bar /= static_cast<double>(M);

    bool changed = false;
    for (int m = 0; m < M; ++m) {
      // Minimizing the KL divergence from q_bar amounts to maximizing
      // sum_{i,k} q_bar(i,k) log p(i, perm[k], m).
      for (int a = 0; a < K; ++a) {
        for (int b = 0; b < K; ++b) {
          double dot = 0.0;
          for (int i = 0; i < N; ++i) {
            dot += q_bar(i, a) * safe_log(probs.at(i, b, m));
          }
          cost(a, b) = -dot;
        }
      }
      std::vector<int> perm = assignment_min_cost(cost);
      if (perm != perms[m]) {
        perms[m] = std::move(perm);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return perms;
}

int apply_permutations(ChainSample* sample,
                       const std::vector<std::vector<int>>& perms) {
  int K = sample->K, q = sample->q, N = sample->N;
  int M = static_cast<int>(sample->draws.rows());
  if (static_cast<int>(perms.size()) != M) {
    throw ValidationError("apply_permutations: permutation count != draws");
  }
  const ParamLayout& lay = sample->layout;
  int dlen = lay.vech_len();
  std::vector<int> identity(K);
  std::iota(identity.begin(), identity.end(), 0);

  int moved = 0;
  Eigen::RowVectorXd tmp;
  std::vector<double> ptmp(K);
  for (int m = 0; m < M; ++m) {
    const std::vector<int>& perm = perms[m];
    if (perm == identity) continue;
    ++moved;
    tmp = sample->draws.row(m);
    for (int k = 0; k < K; ++k) {
      int src = perm[k];
      sample->draws(m, lay.w_index(k)) = tmp[lay.w_index(src)];
      for (int j = 0; j < q; ++j) {
        sample->draws(m, lay.mu_index(k, j)) = tmp[lay.mu_index(src, j)];
      }
      for (int t = 0; t < dlen; ++t) {
        sample->draws(m, lay.d_index(k) + t) = tmp[lay.d_index(src) + t];
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < K; ++k) {
        ptmp[k] = sample->allocprobs.at(i, perm[k], m);
      }
      for (int k = 0; k < K; ++k) sample->allocprobs.at(i, k, m) = ptmp[k];
    }
  }
  return moved;
}

ComponentProbResult posterior_component_probs(const ChainSample& sample,
                                              const ValidatedDataset& data,
                                              ProbBackend backend,
                                              const MargLikOptions& opts) {
  int N = sample.N, K = sample.K;
  int M = static_cast<int>(sample.draws.rows());
  ComponentProbResult out;
  if (backend == ProbBackend::augmented) {
    out.draws = sample.allocprobs;
  } else {
    out.draws = AllocProbs(N, K, M);
    AllocProbs& dr = out.draws;
    parallel_for(M, [&](std::size_t begin, std::size_t end) {
      Eigen::VectorXd terms(K);
      for (std::size_t m = begin; m < end; ++m) {
        MixtureParams mix = sample.mixture_at(static_cast<int>(m));
        GlmmParams glmm = sample.glmm_at(static_cast<int>(m), data);
        for (int i = 0; i < N; ++i) {
          for (int k = 0; k < K; ++k) {
            terms[k] =
                mix.w[k] > 0.0
                    ? std::log(mix.w[k]) +
                          component_log_marglik(
                              data, i, k, glmm, mix, opts,
                              static_cast<std::uint32_t>(m))
                    : -std::numeric_limits<double>::infinity();
          }
          double lse = log_sum_exp(terms);
          for (int k = 0; k < K; ++k) {
            dr.at(i, k, static_cast<int>(m)) =
                std::isfinite(lse) ? std::exp(terms[k] - lse)
                                   : mix.w[k];
          }
        }
      }
    });
  }
  out.pi_hat = Eigen::MatrixXd::Zero(N, K);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (int m = 0; m < M; ++m) acc += out.draws.at(i, k, m);
      out.pi_hat(i, k) = acc / M;
    }
  }
  return out;
}

std::pair<double, double> hpd_interval(std::vector<double> samples,
                                       double level) {
  if (samples.empty()) throw ValidationError("hpd_interval: no samples");
  if (!(level > 0.0) || level > 1.0) {
    throw ValidationError("hpd_interval: level must be in (0, 1]");
  }
  std::sort(samples.begin(), samples.end());
  int n = static_cast<int>(samples.size());
  int h = static_cast<int>(std::ceil(level * n));
  h = std::clamp(h, 1, n);
  int best = 0;
  double best_width = std::numeric_limits<double>::infinity();
  for (int j = 0; j + h <= n; ++j) {
    double width = samples[j + h - 1] - samples[j];
    if (width < best_width) {
      best_width = width;
      best = j;
    }
  }
  return {samples[best], samples[best + h - 1]};
}

Classification classify(const Eigen::MatrixXd& pi_hat) {
  int N = static_cast<int>(pi_hat.rows());
  int K = static_cast<int>(pi_hat.cols());
  Classification out;
  out.assignment.resize(N);
  out.tie.assign(N, false);
  for (int i = 0; i < N; ++i) {
    int best = 0;
    for (int k = 1; k < K; ++k) {
      if (pi_hat(i, k) > pi_hat(i, best)) best = k;
    }
    for (int k = 0; k < K; ++k) {
      if (k != best && pi_hat(i, k) == pi_hat(i, best)) out.tie[i] = true;
    }
    out.assignment[i] = best;
  }
  return out;
}

ThresholdedClassification classify_thresholded(const AllocProbs& prob_draws,
                                               double level,
                                               double threshold) {
  int N = prob_draws.N, K = prob_draws.K, M = prob_draws.M;
  ThresholdedClassification out;
  out.assignment.assign(N, -1);
  out.deferred.assign(N, true);
  out.pi_hat = Eigen::MatrixXd::Zero(N, K);
  out.hpd.resize(N);
  std::vector<double> column(M);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (int m = 0; m < M; ++m) acc += prob_draws.at(i, k, m);
      out.pi_hat(i, k) = acc / M;
    }
    int best = 0;
    for (int k = 1; k < K; ++k) {
      if (out.pi_hat(i, k) > out.pi_hat(i, best)) best = k;
    }
    for (int m = 0; m < M; ++m) column[m] = prob_draws.at(i, best, m);
    out.hpd[i] = hpd_interval(column, level);
    if (out.hpd[i].first > threshold) {
      out.assignment[i] = best;
      out.deferred[i] = false;
    }
  }
  return out;
}

std::vector<ParameterSummary> summarize(const ChainSample& sample,
                                        double hpd_level) {
  int M = static_cast<int>(sample.draws.rows());
  std::vector<ParameterSummary> out;
  out.reserve(sample.layout.size());
  std::vector<double> column(M);
  for (int c = 0; c < sample.layout.size(); ++c) {
    ParameterSummary ps;
    ps.name = sample.layout.names()[c];
    double mean = sample.draws.col(c).mean();
    ps.mean = mean;
    ps.sd = M > 1 ? std::sqrt((sample.draws.col(c).array() - mean)
                                  .square()
                                  .sum() /
                              (M - 1))
                  : 0.0;
    for (int m = 0; m < M; ++m) column[m] = sample.draws(m, c);
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    ps.median = M % 2 == 1 ? sorted[M / 2]
                           : 0.5 * (sorted[M / 2 - 1] + sorted[M / 2]);
    auto [lo, hi] = hpd_interval(column, hpd_level);
    ps.hpd_lower = lo;
    ps.hpd_upper = hi;
    out.push_back(std::move(ps));
  }
  return out;
}

}  // namespace longmix
