#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "longmix/data.hpp"
#include "longmix/marglik.hpp"
#include "longmix/mixture.hpp"
#include "longmix/prior.hpp"
#include "longmix/rng.hpp"

namespace longmix {

struct McmcConfig {
  int keep = 10000;    // stored draws
  int thin = 100;      // raw sweeps per stored draw
  int burnin = 1000;   // discarded stored-scale iterations (burnin * thin sweeps)
  std::uint64_t seed = 1;
  int threads = 1;
  bool adapt = true;   // adapt proposal scales during burn-in
  bool store_random_effects = false;
  // Diagnostic switch: drop every data term from the full conditionals so
  // the sweep targets the joint prior exactly (used by distribution tests).
  bool prior_only = false;
};

// Column layout of the flattened parameter vector written to params.csv:
// weights, then component means, then vech of each covariance, then fixed
// effects of markers that have any, then gaussian dispersions, then the
// hyper-scale diagonal.
class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(const std::vector<MarkerSpec>& markers, int K, int q);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  int w_index(int k) const { return k; }
  int mu_index(int k, int j) const { return K_ + k * q_ + j; }
  int d_index(int k) const { return K_ + K_ * q_ + k * dlen_; }  // vech start
  int alpha_index(int r) const { return alpha_off_[r]; }          // -1 if p_r = 0
  int phi_index(int r) const { return phi_off_[r]; }              // -1 if not gaussian
  int xi_index(int j) const { return xi_off_ + j; }

  int K() const { return K_; }
  int q() const { return q_; }
  int vech_len() const { return dlen_; }

 private:
  int K_ = 0, q_ = 0, dlen_ = 0, xi_off_ = 0;
  std::vector<int> alpha_off_, phi_off_;
  std::vector<std::string> names_;
};

// Dense N x K x M tensor of stored conditional allocation probabilities
// P(u_i = k | b_i^{(m)}, theta^{(m)}), laid out [((i*K)+k)*M + m].
struct AllocProbs {
  int N = 0, K = 0, M = 0;
  std::vector<double> values;

  AllocProbs() = default;
  AllocProbs(int n, int k, int m)
      : N(n), K(k), M(m), values(static_cast<std::size_t>(n) * k * m, 0.0) {}
  double& at(int i, int k, int m) {
    return values[(static_cast<std::size_t>(i) * K + k) * M + m];
  }
  double at(int i, int k, int m) const {
    return values[(static_cast<std::size_t>(i) * K + k) * M + m];
  }
};

struct AcceptanceRates {
  double random_effects = 1.0;          // post burn-in average across subjects
  std::vector<double> alpha;            // per marker; 1.0 for conjugate updates
};

// One MCMC run: kept draws in rows, plus the allocation-probability tensor
// needed for relabeling and classification.
struct ChainSample {
  ParamLayout layout;
  Eigen::MatrixXd draws;                // keep x layout.size()
  AllocProbs allocprobs;
  std::vector<Eigen::MatrixXd> b_draws; // optional, keep entries of N x q
  AcceptanceRates acceptance;
  McmcConfig config;
  PriorSpec prior;
  int K = 0, q = 0, N = 0;

  MixtureParams mixture_at(int m) const;
  GlmmParams glmm_at(int m, const ValidatedDataset& data) const;
  Eigen::VectorXd xi_scale_at(int m) const;
};

// Mutable state of one chain between sweeps.
struct ChainState {
  std::vector<int> u;            // allocations, 0-based
  Eigen::MatrixXd b;             // N x q
  MixtureParams mixture;
  GlmmParams glmm;
  Eigen::VectorXd xi_scale;      // diagonal of Xi

  // Random-walk proposal state (random effects per subject, fixed effects
  // per non-gaussian marker): log step scale and Cholesky of the proposal
  // covariance shape.
  Eigen::VectorXd log_step_b;
  std::vector<Eigen::MatrixXd> prop_chol_b;
  std::vector<double> log_step_alpha;
  std::vector<Eigen::MatrixXd> prop_chol_alpha;

  // Acceptance counters for the current adaptation window and for the
  // post burn-in phase.
  Eigen::ArrayXd win_acc_b, win_try_b;
  Eigen::ArrayXd run_acc_b, run_try_b;
  std::vector<double> win_acc_alpha, win_try_alpha;
  std::vector<double> run_acc_alpha, run_try_alpha;
};

// Crude per-subject random-effect estimates used to seed the chain and the
// default prior: a pooled GLM fit per marker followed by per-subject Newton
// fits ridged toward the pooled coefficients.
struct CrudeEstimates {
  Eigen::MatrixXd b;                    // N x q
  std::vector<Eigen::VectorXd> alpha;   // per marker
  std::vector<double> phi;              // per marker (1 unless gaussian)
};

CrudeEstimates crude_random_effects(const ValidatedDataset& data,
                                    double ridge = 0.5);

// Block Gibbs sampler; the MH blocks use adaptive random-walk proposals
// whose scales follow a Robbins-Monro recursion during burn-in and stay
// frozen afterwards.
class GibbsSampler {
 public:
  GibbsSampler(const ValidatedDataset& data, int K, PriorSpec prior,
               McmcConfig config);

  ChainState initial_state() const;

  void update_allocations(ChainState& s, long sweep) const;
  void update_weights(ChainState& s, long sweep) const;
  void update_means_covariances(ChainState& s, long sweep) const;
  void update_hyper_scale(ChainState& s, long sweep) const;
  // Joint rescaling of one covariance diagonal together with the matching
  // member deviations.  The single-site conditionals cannot leave a state
  // where a collapsed variance and shrunken deviations pin each other (seen
  // on weakly informed dimensions such as a binary random intercept); this
  // expansion move walks out of it in a few sweeps.
  void rescale_covariances(ChainState& s, long sweep) const;
  void update_random_effects(ChainState& s, long sweep, bool adapting) const;
  void update_glmm_params(ChainState& s, long sweep, bool adapting) const;

  // Runs burn-in + kept sweeps with the configured thinning and returns the
  // stored chain.  On a numerical failure inside a block, rethrows with the
  // sweep index, block name, and a compact state snapshot in the message.
  ChainSample run() const;

  const ParamLayout& layout() const { return layout_; }

 private:
  void one_sweep(ChainState& s, long sweep, bool adapting) const;
  void adapt_scales(ChainState& s, long window_index) const;
  void refresh_proposal_shapes(ChainState& s) const;
  void store_draw(ChainSample& out, const ChainState& s, int m) const;

  const ValidatedDataset& data_;
  int K_;
  PriorSpec prior_;
  McmcConfig config_;
  ParamLayout layout_;
  int adapt_window_ = 50;
};

ChainSample run_chain(const ValidatedDataset& data, int K,
                      const PriorSpec& prior, const McmcConfig& config);

}  // namespace longmix
