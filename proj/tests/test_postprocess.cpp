#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "longmix/postprocess.hpp"
#include "longmix/rng.hpp"

using namespace longmix;

namespace {

MarkerSpec marker(const std::string& name, Family f,
                  const std::vector<std::string>& fixed,
                  const std::vector<std::string>& random) {
  MarkerSpec m;
  m.name = name;
  m.family = f;
  for (const std::string& s : fixed) m.fixed.push_back(Covariate::parse(s));
  for (const std::string& s : random) m.random.push_back(Covariate::parse(s));
  return m;
}

std::vector<int> identity_perm(int K) {
  std::vector<int> p(K);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

double assignment_cost(const Eigen::MatrixXd& cost,
                       const std::vector<int>& perm) {
  double total = 0.0;
  for (int a = 0; a < static_cast<int>(perm.size()); ++a) {
    total += cost(a, perm[a]);
  }
  return total;
}

// Stephens objective sum_m KL(q_bar || p_m o perm_m) given fixed q_bar.
double stephens_objective(const AllocProbs& probs,
                          const std::vector<std::vector<int>>& perms) {
  Eigen::MatrixXd q_bar = Eigen::MatrixXd::Zero(probs.N, probs.K);
  for (int m = 0; m < probs.M; ++m) {
    for (int i = 0; i < probs.N; ++i) {
      for (int k = 0; k < probs.K; ++k) {
        q_bar(i, k) += probs.at(i, perms[m][k], m);
      }
    }
  }
  q_bar /= static_cast<double>(probs.M);
  double obj = 0.0;
  for (int m = 0; m < probs.M; ++m) {
    for (int i = 0; i < probs.N; ++i) {
      for (int k = 0; k < probs.K; ++k) {
        obj += q_bar(i, k) *
               (std::log(q_bar(i, k)) - std::log(probs.at(i, perms[m][k], m)));
      }
    }
  }
  return obj;
}

}  // namespace

TEST_SUITE_BEGIN("postprocess");

TEST_CASE("hpd interval finds the shortest covering window") {
  std::vector<double> grid(10001);
  for (int j = 0; j <= 10000; ++j) grid[j] = j / 10000.0;
  // shuffle deterministically; the function sorts internally
  RngStream rng(5, 1, 0, 0);
  for (int j = 10000; j > 0; --j) {
    int l = static_cast<int>(rng.uniform() * (j + 1));
    std::swap(grid[j], grid[std::min(l, j)]);
  }
  auto [lo, hi] = hpd_interval(grid, 0.95);
  // all windows tie on width; the first (lowest) window wins
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi - lo == doctest::Approx(0.95).epsilon(1e-12));

  auto skew = hpd_interval({0.0, 1.0, 2.0, 3.0, 10.0}, 0.6);
  CHECK(skew.first == 0.0);   // ceil(3) points; [0,2] beats [2,10]
  CHECK(skew.second == 2.0);

  auto flat = hpd_interval({2.5, 2.5, 2.5, 2.5}, 0.95);
  CHECK(flat.first == 2.5);
  CHECK(flat.second == 2.5);

  auto full = hpd_interval({3.0, 1.0, 2.0}, 1.0);
  CHECK(full.first == 1.0);
  CHECK(full.second == 3.0);

  auto point = hpd_interval({3.0, 1.0, 2.0}, 1e-9);  // h clamps to 1
  CHECK(point.first == point.second);

  auto single = hpd_interval({4.2}, 0.95);
  CHECK(single.first == 4.2);
  CHECK(single.second == 4.2);

  CHECK_THROWS_AS(hpd_interval({}, 0.95), ValidationError);
  CHECK_THROWS_AS(hpd_interval({1.0, 2.0}, 0.0), ValidationError);
  CHECK_THROWS_AS(hpd_interval({1.0, 2.0}, -0.5), ValidationError);
  CHECK_THROWS_AS(hpd_interval({1.0, 2.0}, 1.5), ValidationError);
}

TEST_CASE("assignment solver: hand example and input validation") {
  Eigen::MatrixXd cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  std::vector<int> expect = {1, 0, 2};  // total 1 + 2 + 2 = 5
  CHECK(assignment_min_cost(cost) == expect);
  CHECK(assignment_min_cost(cost, true) == expect);

  CHECK_THROWS_AS(assignment_min_cost(Eigen::MatrixXd::Zero(2, 3)),
                  ValidationError);
  CHECK_THROWS_AS(assignment_min_cost(Eigen::MatrixXd()), ValidationError);
  Eigen::MatrixXd bad = cost;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(assignment_min_cost(bad), NumericalError);
}

TEST_CASE("hungarian equals exhaustive search on random cost matrices") {
  int tensors = 0;
  for (int K = 2; K <= 6; ++K) {
    for (int t = 0; t < 60; ++t) {
      RngStream rng(2024, 4, static_cast<std::uint32_t>(K),
                    static_cast<std::uint32_t>(t));
      // Stephens-style cost from a random probability tensor
      Eigen::MatrixXd q_bar(5, K), logp(5, K);
      for (int i = 0; i < 5; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (int k = 0; k < K; ++k) {
          q_bar(i, k) = rng.gamma(0.8, 1.0) + 1e-12;
          logp(i, k) = rng.gamma(0.8, 1.0) + 1e-12;
          s1 += q_bar(i, k);
          s2 += logp(i, k);
        }
        for (int k = 0; k < K; ++k) {
          q_bar(i, k) /= s1;
          logp(i, k) = std::log(logp(i, k) / s2);
        }
      }
      Eigen::MatrixXd cost = -q_bar.transpose() * logp;
      std::vector<int> ex = assignment_min_cost(cost, false);
      std::vector<int> hu = assignment_min_cost(cost, true);
      CHECK(ex == hu);
      ++tensors;
    }
  }
  CHECK(tensors == 300);

  // above the exhaustive cutoff, cross-check against brute force in-test
  for (int t = 0; t < 3; ++t) {
    RngStream rng(2024, 5, 8, static_cast<std::uint32_t>(t));
    Eigen::MatrixXd cost(8, 8);
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) cost(a, b) = rng.uniform();
    }
    std::vector<int> perm = identity_perm(8), best = perm;
    double best_total = std::numeric_limits<double>::infinity();
    do {
      double total = assignment_cost(cost, perm);
      if (total < best_total) {
        best_total = total;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(assignment_min_cost(cost) == best);
  }
}

TEST_CASE("relabeling is the identity when no switching is present") {
  AllocProbs probs(6, 3, 20);
  for (int i = 0; i < 6; ++i) {
    int c = i % 3;
    for (int m = 0; m < 20; ++m) {
      for (int k = 0; k < 3; ++k) {
        probs.at(i, k, m) = k == c ? 0.9 : 0.05;
      }
    }
  }
  std::vector<std::vector<int>> perms = stephens_relabel(probs);
  for (const auto& p : perms) CHECK(p == identity_perm(3));

  AllocProbs one(4, 1, 7);
  for (int i = 0; i < 4; ++i) {
    for (int m = 0; m < 7; ++m) one.at(i, 0, m) = 1.0;
  }
  for (const auto& p : stephens_relabel(one)) CHECK(p == identity_perm(1));
}

TEST_CASE("relabeling undoes label swaps in a random half of the draws") {
  // noisy, well-separated two-component chain
  const int N = 25, M = 80;
  AllocProbs probs(N, 2, M);
  std::set<int> swapped;
  for (int m = 0; m < M; ++m) {
    RngStream coin(123, 77, 0, static_cast<std::uint32_t>(m));
    bool swap = coin.uniform() < 0.5;
    if (swap) swapped.insert(m);
    for (int i = 0; i < N; ++i) {
      RngStream rng(123, 78, static_cast<std::uint32_t>(i),
                    static_cast<std::uint32_t>(m));
      double base = i < 13 ? 0.97 : 0.04;
      double z = std::log(base / (1.0 - base)) + 0.3 * rng.normal();
      double p1 = 1.0 / (1.0 + std::exp(-z));
      probs.at(i, swap ? 1 : 0, m) = p1;
      probs.at(i, swap ? 0 : 1, m) = 1.0 - p1;
    }
  }
  REQUIRE(swapped.size() > 25);
  REQUIRE(swapped.size() < 55);

  std::vector<std::vector<int>> perms = stephens_relabel(probs);
  std::set<int> recovered;
  std::vector<int> flip = {1, 0};
  for (int m = 0; m < M; ++m) {
    if (perms[m] == flip) recovered.insert(m);
    else CHECK(perms[m] == identity_perm(2));
  }
  CHECK(recovered == swapped);

  // the relabeled chain beats the raw labeling on the Stephens objective
  std::vector<std::vector<int>> raw(M, identity_perm(2));
  CHECK(stephens_objective(probs, perms) <
        stephens_objective(probs, raw) - 1.0);
}

TEST_CASE("relabeling recovers a three-component cycle") {
  // stored = base with components cycled by tau = (0->1, 1->2, 2->0)
  const int N = 18, M = 42;
  std::vector<int> tau = {1, 2, 0}, tau_inv = {2, 0, 1};
  AllocProbs probs(N, 3, M);
  auto base = [](int i, int k) { return k == i % 3 ? 0.8 : 0.1; };
  for (int m = 0; m < M; ++m) {
    bool cycled = m >= 30;
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < 3; ++k) {
        probs.at(i, k, m) = cycled ? base(i, tau[k]) : base(i, k);
      }
    }
  }
  std::vector<std::vector<int>> perms = stephens_relabel(probs);
  for (int m = 0; m < M; ++m) {
    CHECK(perms[m] == (m >= 30 ? tau_inv : identity_perm(3)));
  }
}

TEST_CASE("applying permutations moves every component block together") {
  std::vector<MarkerSpec> mk = {
      marker("g", Family::gaussian, {}, {"intercept"})};
  const int M = 30, N = 10;
  ChainSample s;
  s.layout = ParamLayout(mk, 2, 1);
  s.K = 2;
  s.q = 1;
  s.N = N;
  s.draws.resize(M, s.layout.size());
  s.allocprobs = AllocProbs(N, 2, M);

  const ParamLayout& lay = s.layout;
  int n_swapped = 0;
  for (int m = 0; m < M; ++m) {
    bool swap = m % 3 == 1;
    n_swapped += swap ? 1 : 0;
    int a = swap ? 1 : 0, b = swap ? 0 : 1;
    s.draws(m, lay.w_index(a)) = 0.3;
    s.draws(m, lay.w_index(b)) = 0.7;
    s.draws(m, lay.mu_index(a, 0)) = -1.0;
    s.draws(m, lay.mu_index(b, 0)) = 2.0;
    s.draws(m, lay.d_index(a)) = 0.1;
    s.draws(m, lay.d_index(b)) = 0.2;
    s.draws(m, lay.phi_index(0)) = 0.5;
    s.draws(m, lay.xi_index(0)) = 1.0;
    for (int i = 0; i < N; ++i) {
      double p_first = i < 6 ? 0.9 : 0.15;
      s.allocprobs.at(i, a, m) = p_first;
      s.allocprobs.at(i, b, m) = 1.0 - p_first;
    }
  }

  std::vector<std::vector<int>> perms = stephens_relabel(s.allocprobs);
  int moved = apply_permutations(&s, perms);
  CHECK(moved == n_swapped);
  for (int m = 0; m < M; ++m) {
    CHECK(s.draws(m, lay.w_index(0)) == 0.3);
    CHECK(s.draws(m, lay.w_index(1)) == 0.7);
    CHECK(s.draws(m, lay.mu_index(0, 0)) == -1.0);
    CHECK(s.draws(m, lay.mu_index(1, 0)) == 2.0);
    CHECK(s.draws(m, lay.d_index(0)) == 0.1);
    CHECK(s.draws(m, lay.d_index(1)) == 0.2);
    CHECK(s.allocprobs.at(0, 0, m) == 0.9);
    CHECK(s.allocprobs.at(9, 1, m) == 0.85);
  }

  std::vector<std::vector<int>> wrong(M - 1, identity_perm(2));
  CHECK_THROWS_AS(apply_permutations(&s, wrong), ValidationError);
}

TEST_CASE("marginal component probabilities follow the weighted likelihoods") {
  // one subject, one observation y=0; component 2 placed so L1 = 2 L2
  Dataset raw;
  raw.markers = {marker("g", Family::gaussian, {}, {"intercept"})};
  SubjectData sub;
  sub.id = "s";
  sub.obs = {{{0.0, 0.0}}};
  raw.subjects = {sub};
  ValidatedDataset data = ValidatedDataset::validate(raw);

  std::vector<MarkerSpec> mk = raw.markers;
  ChainSample s;
  s.layout = ParamLayout(mk, 2, 1);
  s.K = 2;
  s.q = 1;
  s.N = 1;
  const ParamLayout& lay = s.layout;
  s.draws.resize(1, lay.size());
  s.draws(0, lay.w_index(0)) = 0.6;
  s.draws(0, lay.w_index(1)) = 0.4;
  s.draws(0, lay.mu_index(0, 0)) = 0.0;
  s.draws(0, lay.mu_index(1, 0)) = std::sqrt(2.0 * std::log(2.0));
  s.draws(0, lay.d_index(0)) = 0.5;
  s.draws(0, lay.d_index(1)) = 0.5;
  s.draws(0, lay.phi_index(0)) = 0.5;
  s.draws(0, lay.xi_index(0)) = 1.0;
  s.allocprobs = AllocProbs(1, 2, 1);
  s.allocprobs.at(0, 0, 0) = 0.5;
  s.allocprobs.at(0, 1, 0) = 0.5;

  MargLikOptions opts;
  opts.method = MargLikMethod::closed_form;
  ComponentProbResult marginal =
      posterior_component_probs(s, data, ProbBackend::marginal, opts);
  // p1 = .6 L1 / (.6 L1 + .4 L1/2) = 0.75
  CHECK(marginal.pi_hat(0, 0) == doctest::Approx(0.75).epsilon(1e-13));
  CHECK(marginal.pi_hat(0, 1) == doctest::Approx(0.25).epsilon(1e-13));

  ComponentProbResult augmented =
      posterior_component_probs(s, data, ProbBackend::augmented, opts);
  CHECK(augmented.pi_hat(0, 0) == 0.5);
  CHECK(augmented.draws.values == s.allocprobs.values);
}

TEST_CASE("marginal probabilities agree with the frozen two-marker value") {
  Dataset raw;
  raw.markers = {marker("m1", Family::gaussian, {}, {"intercept", "time"}),
                 marker("m2", Family::gaussian, {"time"}, {"intercept"})};
  SubjectData sub;
  sub.id = "s";
  sub.obs = {{{0.0, 0.2}, {1.0, 0.5}, {2.0, 0.9}}, {{0.0, 4.8}, {2.0, 5.5}}};
  raw.subjects = {sub};
  ValidatedDataset data = ValidatedDataset::validate(raw);

  ChainSample s;
  s.layout = ParamLayout(raw.markers, 2, 3);
  s.K = 2;
  s.q = 3;
  s.N = 1;
  const ParamLayout& lay = s.layout;
  s.draws.resize(2, lay.size());
  Eigen::MatrixXd d1(3, 3);
  d1 << 0.09, 0.002, 0.01, 0.002, 0.0004, 0.001, 0.01, 0.001, 1.0;
  Eigen::VectorXd v1 = vech(d1), v2 = vech(Eigen::MatrixXd(1.5 * d1));
  for (int m = 0; m < 2; ++m) {
    s.draws(m, lay.w_index(0)) = 0.55;
    s.draws(m, lay.w_index(1)) = 0.45;
    double mu1[3] = {0.1, 0.2, 5.0}, mu2[3] = {0.6, 0.1, 4.2};
    for (int j = 0; j < 3; ++j) {
      s.draws(m, lay.mu_index(0, j)) = mu1[j];
      s.draws(m, lay.mu_index(1, j)) = mu2[j];
    }
    for (int t = 0; t < lay.vech_len(); ++t) {
      s.draws(m, lay.d_index(0) + t) = v1[t];
      s.draws(m, lay.d_index(1) + t) = v2[t];
    }
    s.draws(m, lay.alpha_index(1)) = 0.5;
    s.draws(m, lay.phi_index(0)) = 0.09;
    s.draws(m, lay.phi_index(1)) = 0.5;
    for (int j = 0; j < 3; ++j) s.draws(m, lay.xi_index(j)) = 1.0;
  }
  s.allocprobs = AllocProbs(1, 2, 2);

  MargLikOptions opts;
  opts.method = MargLikMethod::closed_form;
  ComponentProbResult res =
      posterior_component_probs(s, data, ProbBackend::marginal, opts);
  // oracle: log L1 = -2.371234389960419, log L2 = -3.041282749517048
  CHECK(res.pi_hat(0, 0) == doctest::Approx(0.704895296359716).epsilon(1e-12));
  CHECK(res.draws.at(0, 0, 0) == doctest::Approx(res.draws.at(0, 0, 1)));
}

TEST_CASE("classification picks the largest posterior probability") {
  Eigen::MatrixXd pi(3, 2);
  pi << 0.667, 0.333, 0.5, 0.5, 0.2, 0.8;
  Classification c = classify(pi);
  CHECK(c.assignment == std::vector<int>({0, 0, 1}));
  CHECK(c.tie == std::vector<bool>({false, true, false}));

  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(4, 1);
  Classification k1 = classify(one);
  CHECK(k1.assignment == std::vector<int>({0, 0, 0, 0}));
  CHECK(std::none_of(k1.tie.begin(), k1.tie.end(), [](bool t) { return t; }));
}

TEST_CASE("thresholded classification assigns confident subjects only") {
  const int M = 200;
  AllocProbs probs(3, 2, M);
  for (int m = 0; m < M; ++m) {
    // subject 0: concentrated near 0.99 -> assign
    double a = 0.97 + 0.0001 * (m % 30);
    probs.at(0, 0, m) = a;
    probs.at(0, 1, m) = 1.0 - a;
    // subject 1: bimodal -> defer despite mean > 0.5
    double c = m % 5 < 3 ? 0.99 : 0.10;
    probs.at(1, 0, m) = c;
    probs.at(1, 1, m) = 1.0 - c;
    // subject 2: all mass on component 2 exactly
    probs.at(2, 0, m) = 0.0;
    probs.at(2, 1, m) = 1.0;
  }
  ThresholdedClassification r = classify_thresholded(probs, 0.95, 0.5);

  CHECK(r.assignment[0] == 0);
  CHECK_FALSE(r.deferred[0]);
  CHECK(r.hpd[0].first >= 0.97);
  CHECK(r.hpd[0].second <= 0.9731);

  CHECK(r.assignment[1] == -1);
  CHECK(r.deferred[1]);
  CHECK(r.pi_hat(1, 0) == doctest::Approx(0.634).epsilon(1e-12));
  CHECK(r.hpd[1].first == doctest::Approx(0.10));
  CHECK(r.hpd[1].second == doctest::Approx(0.99));

  CHECK(r.assignment[2] == 1);
  CHECK_FALSE(r.deferred[2]);
  CHECK(r.hpd[2].first == 1.0);
  CHECK(r.hpd[2].second == 1.0);

  // the threshold is strict: an interval touching it exactly defers
  AllocProbs edge(1, 2, 4);
  for (int m = 0; m < 4; ++m) {
    edge.at(0, 0, m) = 0.5;
    edge.at(0, 1, m) = 0.5;
  }
  ThresholdedClassification e = classify_thresholded(edge, 0.95, 0.5);
  CHECK(e.deferred[0]);
  CHECK(e.assignment[0] == -1);
}

TEST_CASE("summaries report moments, medians, and intervals by name") {
  std::vector<MarkerSpec> mk = {
      marker("g", Family::gaussian, {}, {"intercept"})};
  ChainSample s;
  s.layout = ParamLayout(mk, 1, 1);
  s.K = 1;
  s.q = 1;
  s.N = 2;
  s.draws.resize(5, s.layout.size());
  double mu_draws[5] = {1.0, 2.0, 3.0, 4.0, 10.0};
  for (int m = 0; m < 5; ++m) {
    s.draws(m, s.layout.w_index(0)) = 1.0;
    s.draws(m, s.layout.mu_index(0, 0)) = mu_draws[m];
    s.draws(m, s.layout.d_index(0)) = 0.5;
    s.draws(m, s.layout.phi_index(0)) = 0.25;
    s.draws(m, s.layout.xi_index(0)) = 2.0;
  }
  std::vector<ParameterSummary> sum = summarize(s, 0.6);
  auto find = [&](const std::string& name) {
    for (const auto& ps : sum) {
      if (ps.name == name) return ps;
    }
    REQUIRE(false);
    return sum[0];
  };
  ParameterSummary mu = find("mu1_1");
  CHECK(mu.mean == doctest::Approx(4.0));
  CHECK(mu.sd == doctest::Approx(std::sqrt(12.5)));
  CHECK(mu.median == 3.0);
  CHECK(mu.hpd_lower == 1.0);  // ceil(0.6*5)=3 points; [1,3] is shortest
  CHECK(mu.hpd_upper == 3.0);
  ParameterSummary w = find("w1");
  CHECK(w.mean == 1.0);
  CHECK(w.sd == 0.0);

  // single-draw chain: point summaries with zero-width intervals
  ChainSample s1 = s;
  s1.draws = s.draws.topRows(1);
  std::vector<ParameterSummary> sum1 = summarize(s1, 0.95);
  CHECK(sum1[1].mean == 1.0);
  CHECK(sum1[1].sd == 0.0);
  CHECK(sum1[1].hpd_lower == sum1[1].hpd_upper);
}

TEST_SUITE_END();
