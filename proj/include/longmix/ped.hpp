#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "longmix/marglik.hpp"
#include "longmix/sampler.hpp"

namespace longmix {

struct PedRecord {
  int K = 0;
  double expected_deviance = 0.0;  // E[D | y], averaged over two chains
  double p_opt = 0.0;              // optimism penalty
  double ped = 0.0;                // expected_deviance + p_opt
  std::string estimator;           // "importance" or "two_pd_fallback"
  double mc_se = 0.0;              // Monte Carlo se of expected_deviance
  int degenerate_subjects = 0;     // subjects whose weights failed the ESS guard
};

// N x M matrix of per-subject log mixture marginal likelihoods, one column
// per stored draw (draw index doubles as the Monte Carlo context).
Eigen::MatrixXd subject_loglik_matrix(const ChainSample& sample,
                                      const ValidatedDataset& data,
                                      const MargLikOptions& opts);

// Penalized expected deviance from two independent chains of the same model.
// The optimism penalty sums, over subjects, importance-weighted covariance
// estimates built from cross-chain draw pairs; subjects whose importance
// weights have effective sample size below 1% of the draw count trip a guard
// that switches the penalty to twice the classical pD (and flags the record).
PedRecord penalized_expected_deviance(const ChainSample& chain_a,
                                      const ChainSample& chain_b,
                                      const ValidatedDataset& data,
                                      const MargLikOptions& opts);

// K with the smallest PED; ties resolved toward the smaller K.
// Throws ValidationError on an empty table.
int select_K(const std::vector<PedRecord>& records);

}  // namespace longmix
