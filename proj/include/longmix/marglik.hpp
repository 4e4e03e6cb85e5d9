#pragma once

#include <atomic>
#include <cstdint>

#include "longmix/data.hpp"
#include "longmix/mixture.hpp"

namespace longmix {

// How the per-subject, per-component marginal likelihood
//   L_{ik} = integral prod_j p(y_ij | b) phi(b; mu_k, D_k) db
// is evaluated.
enum class MargLikMethod { closed_form, laplace, mc };

MargLikMethod marglik_method_from_string(const std::string& s);
std::string marglik_method_to_string(MargLikMethod m);

struct MargLikOptions {
  MargLikMethod method = MargLikMethod::laplace;
  int mc_draws = 4096;
  int laplace_max_iter = 50;
  double laplace_grad_tol = 1e-8;
  std::uint64_t seed = 0;  // used by mc and by the Laplace fallback
  // Incremented when a Laplace mode search fails to converge and the value
  // falls back to Monte Carlo.  May be null.
  std::atomic<long>* laplace_fallbacks = nullptr;
};

// Exact log L_{ik} when every observation of subject i is gaussian:
// y_i ~ N(X alpha + Z mu_k, Z D_k Z' + diag(phi)).  Throws ValidationError
// if the subject has non-gaussian observations.
double gaussian_closed_form(const ValidatedDataset& data, int i, int k,
                            const GlmmParams& glmm, const MixtureParams& mix);

// Laplace approximation around the mode of p(y_i | b) phi(b; mu_k, D_k),
// located by damped Newton started at mu_k:
//   log L approx f(b_hat) + (q/2) log 2 pi - 0.5 log det(-H(b_hat)).
// Falls back to Monte Carlo (and counts it) if Newton does not reach
// grad_tol within max_iter.
double laplace_log_marginal(const ValidatedDataset& data, int i, int k,
                            const GlmmParams& glmm, const MixtureParams& mix,
                            const MargLikOptions& opts = {},
                            std::uint32_t context = 0);

// Plain Monte Carlo over b ~ N(mu_k, D_k) with a log-sum-exp average.
// The random stream is keyed by (seed, subject, context * K + k), so callers
// evaluating many parameter draws pass a distinct context per draw.
// If se_out is non-null it receives a delta-method standard error of the
// returned log value.
double mc_log_marginal(const ValidatedDataset& data, int i, int k,
                       const GlmmParams& glmm, const MixtureParams& mix,
                       int draws, std::uint64_t seed, std::uint32_t context = 0,
                       double* se_out = nullptr);

// Dispatch on opts.method.  closed_form requires an all-gaussian subject.
double component_log_marglik(const ValidatedDataset& data, int i, int k,
                             const GlmmParams& glmm, const MixtureParams& mix,
                             const MargLikOptions& opts,
                             std::uint32_t context = 0);

// log sum_k w_k L_{ik}
double log_mixture_marglik(const ValidatedDataset& data, int i,
                           const GlmmParams& glmm, const MixtureParams& mix,
                           const MargLikOptions& opts,
                           std::uint32_t context = 0);

// D(psi, theta) = -2 sum_i log sum_k w_k L_{ik}
double observed_deviance(const ValidatedDataset& data, const GlmmParams& glmm,
                         const MixtureParams& mix, const MargLikOptions& opts,
                         std::uint32_t context = 0);

}  // namespace longmix
