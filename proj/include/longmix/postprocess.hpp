#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "longmix/marglik.hpp"
#include "longmix/sampler.hpp"

namespace longmix {

// Minimum-cost assignment of K workers to K jobs; returns perm with
// perm[row] = column.  Exhaustive search for K <= 6, Hungarian algorithm
// above (force_hungarian exists so tests can cross-check the two).
std::vector<int> assignment_min_cost(const Eigen::MatrixXd& cost,
                                     bool force_hungarian = false);

// Label-switching correction: alternates averaging the permuted allocation
// probabilities with per-draw assignment steps that minimize the
// Kullback-Leibler divergence to the average, until the permutations stop
// changing (at most max_rounds rounds).  Returns perms[m][k] = original
// component index that relabeled component k refers to in draw m.
std::vector<std::vector<int>> stephens_relabel(const AllocProbs& probs,
                                               int max_rounds = 100);

// Reorders every draw of a chain in place according to perms (as returned by
// stephens_relabel): weights, means, covariances, and the allocation
// probability tensor move together.  Returns the number of draws whose
// permutation was not the identity.
int apply_permutations(ChainSample* sample,
                       const std::vector<std::vector<int>>& perms);

enum class ProbBackend {
  augmented,  // reuse the stored conditional allocation probabilities
  marginal,   // recompute p_ik ~ w_k L_ik per draw from the marginal likelihood
};

struct ComponentProbResult {
  Eigen::MatrixXd pi_hat;  // N x K posterior means
  AllocProbs draws;        // per-draw probabilities backing the HPD intervals
};

ComponentProbResult posterior_component_probs(const ChainSample& sample,
                                              const ValidatedDataset& data,
                                              ProbBackend backend,
                                              const MargLikOptions& opts = {});

// Shortest interval containing ceil(level * n) of the sampled points.
std::pair<double, double> hpd_interval(std::vector<double> samples,
                                       double level);

struct Classification {
  std::vector<int> assignment;  // 0-based component index
  std::vector<bool> tie;        // argmax not unique (lowest index reported)
};

Classification classify(const Eigen::MatrixXd& pi_hat);

struct ThresholdedClassification {
  std::vector<int> assignment;      // -1 where deferred
  std::vector<bool> deferred;
  Eigen::MatrixXd pi_hat;
  std::vector<std::pair<double, double>> hpd;  // interval for the chosen component
};

// Assigns subject i to k* = argmax pi_hat only when the HPD interval (at
// `level`) of the per-draw probabilities of k* has lower bound strictly
// above threshold; otherwise the subject is deferred.
ThresholdedClassification classify_thresholded(const AllocProbs& prob_draws,
                                               double level = 0.95,
                                               double threshold = 0.5);

struct ParameterSummary {
  std::string name;
  double mean, sd, median, hpd_lower, hpd_upper;
};

std::vector<ParameterSummary> summarize(const ChainSample& sample,
                                        double hpd_level = 0.95);

}  // namespace longmix
