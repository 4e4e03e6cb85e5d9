#include "longmix/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "longmix/postprocess.hpp"
#include "longmix/rng.hpp"
#include "longmix/stats.hpp"

namespace longmix {

namespace {

constexpr double kDaysPerMonth = 30.4375;

Eigen::MatrixXd cov_from_sd_corr(const Eigen::VectorXd& sd,
                                 const Eigen::MatrixXd& corr) {
  return sd.asDiagonal() * corr * sd.asDiagonal();
}

// Component covariances of the synthetic populations (two distinct shapes;
// the third component reuses the second).
void preset_covariances(SpdMatrix* d1, SpdMatrix* d2) {
  Eigen::VectorXd sd1(5), sd2(5);
  sd1 << 0.428, 0.00837, 0.309, 0.0105, 4.02;
  sd2 << 0.776, 0.03090, 0.398, 0.0232, 2.42;
  Eigen::MatrixXd r1 = Eigen::MatrixXd::Identity(5, 5);
  Eigen::MatrixXd r2 = Eigen::MatrixXd::Identity(5, 5);
  auto set = [](Eigen::MatrixXd& r, int i, int j, double v) {
    r(i, j) = v;
    r(j, i) = v;
  };
  set(r1, 0, 1, 0.031);
  set(r1, 0, 2, -0.282);
  set(r1, 0, 3, -0.086);
  set(r1, 0, 4, 0.326);
  set(r1, 1, 2, 0.040);
  set(r1, 1, 3, -0.214);
  set(r1, 1, 4, 0.100);
  set(r1, 2, 3, -0.039);
  set(r1, 2, 4, -0.042);
  set(r1, 3, 4, 0.028);
  set(r2, 0, 1, -0.183);
  set(r2, 0, 2, 0.119);
  set(r2, 0, 3, -0.139);
  set(r2, 0, 4, 0.171);
  set(r2, 1, 2, -0.034);
  set(r2, 1, 3, 0.249);
  set(r2, 1, 4, 0.116);
  set(r2, 2, 3, -0.046);
  set(r2, 2, 4, -0.191);
  set(r2, 3, 4, -0.043);
  *d1 = SpdMatrix::from_matrix(cov_from_sd_corr(sd1, r1));
  *d2 = SpdMatrix::from_matrix(cov_from_sd_corr(sd2, r2));
}

std::vector<int> scale_counts(const std::vector<int>& base, int total) {
  int base_total = std::accumulate(base.begin(), base.end(), 0);
  if (total == base_total) return base;
  if (total < static_cast<int>(base.size())) {
    throw ValidationError("simulate: fewer subjects than components");
  }
  // Largest-remainder apportionment with at least one subject everywhere.
  std::vector<int> out(base.size());
  std::vector<std::pair<double, int>> rem(base.size());
  int assigned = 0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    double exact = static_cast<double>(base[k]) * total / base_total;
    out[k] = std::max(1, static_cast<int>(std::floor(exact)));
    assigned += out[k];
    rem[k] = {exact - std::floor(exact), static_cast<int>(k)};
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t t = 0; assigned < total; t = (t + 1) % rem.size()) {
    ++out[rem[t].second];
    ++assigned;
  }
  while (assigned > total) {
    // Over-assignment can only come from the minimum-1 floors; shave the
    // largest component.
    int big = static_cast<int>(
        std::max_element(out.begin(), out.end()) - out.begin());
    if (out[big] <= 1) break;
    --out[big];
    --assigned;
  }
  return out;
}

}  // namespace

std::vector<std::string> sim_preset_names() {
  return {"k2-normal", "k2-mvt5", "k3-normal", "k3-mvt5"};
}

std::vector<MarkerSpec> sim_marker_specs() {
  MarkerSpec gauss;
  gauss.name = "continuous";
  gauss.family = Family::gaussian;
  gauss.random = {Covariate::parse("intercept"), Covariate::parse("time")};
  MarkerSpec count;
  count.name = "count";
  count.family = Family::poisson;
  count.random = {Covariate::parse("intercept"), Covariate::parse("time")};
  MarkerSpec binary;
  binary.name = "binary";
  binary.family = Family::bernoulli;
  binary.fixed = {Covariate::parse("time")};
  binary.random = {Covariate::parse("intercept")};
  return {gauss, count, binary};
}

SimSetting sim_preset(const std::string& name, int total_subjects,
                      std::uint64_t seed) {
  SpdMatrix d1, d2;
  preset_covariances(&d1, &d2);

  Eigen::VectorXd mu1(5), mu2(5), mu3(5);
  mu1 << 0.000, 0.0100, 5.00, -0.0050, -3.00;
  mu2 << 1.000, 0.0100, 5.00, -0.0200, -1.00;
  mu3 << 1.300, -0.0300, 5.50, 0.0000, -2.00;

  SimSetting s;
  s.seed = seed;
  bool k3;
  if (name == "k2-normal") {
    k3 = false;
  } else if (name == "k2-mvt5") {
    k3 = false;
    s.heavy_tails = true;
  } else if (name == "k3-normal") {
    k3 = true;
  } else if (name == "k3-mvt5") {
    k3 = true;
    s.heavy_tails = true;
  } else {
    std::ostringstream msg;
    msg << "unknown preset '" << name << "' (expected one of";
    for (const std::string& n : sim_preset_names()) msg << ' ' << n;
    msg << ")";
    throw ValidationError(msg.str());
  }
  if (k3) {
    Eigen::VectorXd w(3);
    w << 0.60, 0.34, 0.06;
    s.mixture = MixtureParams::create(w, {mu1, mu2, mu3}, {d1, d2, d2});
    s.counts = scale_counts({120, 68, 12}, total_subjects);
  } else {
    Eigen::VectorXd w(2);
    w << 0.6, 0.4;
    s.mixture = MixtureParams::create(w, {mu1, mu2}, {d1, d2});
    s.counts = scale_counts({120, 80}, total_subjects);
  }
  return s;
}

SimResult simulate_dataset(const SimSetting& setting) {
  int K = setting.mixture.n_components();
  if (static_cast<int>(setting.counts.size()) != K) {
    throw ValidationError("simulate: counts do not match mixture components");
  }
  int N = std::accumulate(setting.counts.begin(), setting.counts.end(), 0);
  if (N < 1) throw ValidationError("simulate: no subjects requested");
  int q = setting.mixture.dim();
  if (q != 5) throw ValidationError("simulate: mixture must have dimension 5");

  SimResult out;
  out.data.markers = sim_marker_specs();
  out.truth.resize(N);
  out.b_true.resize(N, q);

  int width = static_cast<int>(std::to_string(N).size());
  int i = 0;
  for (int k = 0; k < K; ++k) {
    for (int c = 0; c < setting.counts[k]; ++c, ++i) out.truth[i] = k;
  }

  // Scale for the heavy-tailed generator: a t with 5 degrees of freedom and
  // scale (3/5) D has covariance exactly D.
  std::vector<Eigen::MatrixXd> t_chol(K);
  if (setting.heavy_tails) {
    for (int k = 0; k < K; ++k) {
      t_chol[k] =
          SpdMatrix::from_matrix(0.6 * setting.mixture.d[k].mat()).chol_lower();
    }
  }

  for (i = 0; i < N; ++i) {
    int k = out.truth[i];
    RngStream rng(setting.seed, rngtag::kSim, static_cast<std::uint32_t>(i),
                  0);
    Eigen::VectorXd b =
        setting.heavy_tails
            ? draw_mvt(rng, setting.mixture.mu[k], t_chol[k], 5.0)
            : draw_mvn(rng, setting.mixture.mu[k],
                       setting.mixture.d[k].chol_lower());
    out.b_true.row(i) = b.transpose();

    SubjectData subj;
    {
      std::ostringstream id;
      id << 's';
      std::string digits = std::to_string(i + 1);
      id << std::string(width - digits.size(), '0') << digits;
      subj.id = id.str();
    }
    subj.obs.resize(3);

    auto draw_times = [&rng]() {
      std::array<double, 4> days = {0.0, 0.0, 0.0, 0.0};
      days[1] = rng.uniform(170.0, 200.0);
      days[2] = rng.uniform(350.0, 390.0);
      days[3] = rng.uniform(710.0, 770.0);
      std::array<double, 4> months;
      for (int j = 0; j < 4; ++j) months[j] = days[j] / kDaysPerMonth;
      return months;
    };
    std::array<double, 4> shared{};
    if (setting.share_times) shared = draw_times();

    for (int r = 0; r < 3; ++r) {
      std::array<double, 4> t =
          setting.share_times ? shared : draw_times();
      for (int j = 0; j < 4; ++j) {
        Observation o;
        o.time = t[j];
        switch (r) {
          case 0:
            o.value = b[0] + b[1] * t[j] + setting.sigma_gauss * rng.normal();
            break;
          case 1:
            o.value = static_cast<double>(
                rng.poisson(std::exp(b[2] + b[3] * t[j])));
            break;
          default:
            o.value = rng.bernoulli(
                          logistic(b[4] + setting.alpha_slope * t[j]))
                          ? 1.0
                          : 0.0;
        }
        subj.obs[r].push_back(o);
      }
    }
    out.data.subjects.push_back(std::move(subj));
  }
  return out;
}

double classification_error(const std::vector<int>& assignment,
                            const std::vector<int>& truth, int K) {
  if (assignment.size() != truth.size() || truth.empty()) {
    throw ValidationError("classification_error: size mismatch");
  }
  int N = static_cast<int>(truth.size());
  // Count agreements under the best label matching; deferred subjects (-1)
  // can never match.
  Eigen::MatrixXd neg_conf = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < N; ++i) {
    if (truth[i] < 0 || truth[i] >= K) {
      throw ValidationError("classification_error: truth label out of range");
    }
    if (assignment[i] >= 0 && assignment[i] < K) {
      neg_conf(assignment[i], truth[i]) -= 1.0;
    }
  }
  std::vector<int> perm = assignment_min_cost(neg_conf);
  double matched = 0.0;
  for (int a = 0; a < K; ++a) matched -= neg_conf(a, perm[a]);
  return (N - matched) / N;
}

}  // namespace longmix
