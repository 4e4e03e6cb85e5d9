#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "longmix/data.hpp"
#include "longmix/mixture.hpp"

namespace longmix {

// Synthetic three-marker longitudinal design: a gaussian marker with random
// intercept and slope, a poisson marker with random intercept and slope, and
// a bernoulli marker with random intercept plus a fixed time slope (q = 5).
// Each subject gets four visits per marker at time 0 and uniformly inside
// (170,200), (350,390), (710,770) days; times enter the model in months
// (days / 30.4375).
struct SimSetting {
  std::vector<int> counts;          // subjects per component
  MixtureParams mixture;            // component means/covariances on b
  bool heavy_tails = false;         // draw b from MVT5 moment-matched to D_k
  double sigma_gauss = 0.3;         // residual sd of the gaussian marker
  double alpha_slope = 0.05;        // fixed time slope of the bernoulli marker
  bool share_times = false;         // one visit schedule for all markers
  std::uint64_t seed = 1;
};

// Named presets: "k2-normal", "k2-mvt5", "k3-normal", "k3-mvt5".
// Component counts default to the 200-subject configurations (120/80 and
// 120/68/12); pass total_subjects to rescale them proportionally (rounded,
// keeping at least one subject per component).
SimSetting sim_preset(const std::string& name, int total_subjects = 200,
                      std::uint64_t seed = 1);
std::vector<std::string> sim_preset_names();

// Marker specification shared by the simulator and the model configuration
// the CLI writes next to simulated data.
std::vector<MarkerSpec> sim_marker_specs();

struct SimResult {
  Dataset data;
  std::vector<int> truth;     // true component per subject, 0-based
  Eigen::MatrixXd b_true;     // N x q random effects
};

SimResult simulate_dataset(const SimSetting& setting);

// Fraction of subjects whose assignment differs from the truth under the
// best label permutation (assignments may use a different label order than
// the truth); deferred subjects (-1) always count as errors.
double classification_error(const std::vector<int>& assignment,
                            const std::vector<int>& truth, int K);

}  // namespace longmix
