#include <doctest.h>

#include <Eigen/Dense>
#include <vector>

#include "longmix/ped.hpp"

using namespace longmix;

namespace {

MarkerSpec gauss_marker(bool with_time_slope) {
  MarkerSpec m;
  m.name = "g";
  m.family = Family::gaussian;
  if (with_time_slope) m.fixed = {Covariate::parse("time")};
  m.random = {Covariate::parse("intercept")};
  return m;
}

// three short gaussian subjects shared by the importance-path fixtures
ValidatedDataset three_subjects() {
  Dataset d;
  d.markers = {gauss_marker(true)};
  SubjectData a, b, c;
  a.id = "A";
  a.obs = {{{0.0, 1.0}, {1.0, 1.4}}};
  b.id = "B";
  b.obs = {{{0.0, 2.2}, {2.0, 2.0}}};
  c.id = "C";
  c.obs = {{{1.0, 0.5}}};
  d.subjects = {a, b, c};
  return ValidatedDataset::validate(d);
}

// layout for K=2, q=1: w1 w2 mu1_1 mu2_1 d1_1_1 d2_1_1 alpha_g_1 phi_g xi_1
ChainSample two_component_chain(const std::vector<std::vector<double>>& rows) {
  ChainSample s;
  std::vector<MarkerSpec> mk = {gauss_marker(true)};
  s.layout = ParamLayout(mk, 2, 1);
  s.K = 2;
  s.q = 1;
  s.N = 3;
  s.draws.resize(static_cast<int>(rows.size()), s.layout.size());
  for (std::size_t m = 0; m < rows.size(); ++m) {
    REQUIRE(static_cast<int>(rows[m].size()) == s.layout.size());
    for (int c = 0; c < s.layout.size(); ++c) s.draws(m, c) = rows[m][c];
  }
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("ped");

TEST_CASE("importance estimator matches the frozen two-chain oracle") {
  ValidatedDataset data = three_subjects();
  ChainSample a = two_component_chain(
      {{0.60, 0.40, 0.5, 2.0, 0.30, 0.50, 0.10, 0.20, 1.0},
       {0.55, 0.45, 0.6, 1.9, 0.25, 0.45, 0.12, 0.25, 1.1}});
  ChainSample b = two_component_chain(
      {{0.62, 0.38, 0.45, 2.10, 0.35, 0.55, 0.09, 0.22, 0.9},
       {0.58, 0.42, 0.52, 2.05, 0.28, 0.48, 0.11, 0.21, 1.05}});
  MargLikOptions opts;
  opts.method = MargLikMethod::closed_form;

  Eigen::MatrixXd ell = subject_loglik_matrix(a, data, opts);
  CHECK(ell.rows() == 3);
  CHECK(ell.cols() == 2);
  CHECK(ell.allFinite());

  PedRecord r = penalized_expected_deviance(a, b, data, opts);
  CHECK(r.K == 2);
  CHECK(r.estimator == "importance");
  CHECK(r.degenerate_subjects == 0);
  CHECK(r.expected_deviance ==
        doctest::Approx(9.751337875126904).epsilon(1e-12));
  CHECK(r.p_opt == doctest::Approx(0.018481277724623).epsilon(1e-9));
  CHECK(r.ped == doctest::Approx(9.769819152851527).epsilon(1e-12));
  CHECK(r.mc_se == doctest::Approx(0.108525643326013).epsilon(1e-9));
}

TEST_CASE("pairing a chain with itself removes the optimism penalty") {
  ValidatedDataset data = three_subjects();
  ChainSample a = two_component_chain(
      {{0.60, 0.40, 0.5, 2.0, 0.30, 0.50, 0.10, 0.20, 1.0},
       {0.55, 0.45, 0.6, 1.9, 0.25, 0.45, 0.12, 0.25, 1.1}});
  MargLikOptions opts;
  opts.method = MargLikMethod::closed_form;
  PedRecord r = penalized_expected_deviance(a, a, data, opts);
  CHECK(r.p_opt == 0.0);
  CHECK(r.ped == doctest::Approx(r.expected_deviance));
  CHECK(r.estimator == "importance");
}

TEST_CASE("collapsed importance weights trip the two-pD fallback") {
  // drifting chains: the log likelihood decays so fast along the draw index
  // that the importance weights concentrate on a handful of draws
  Dataset d;
  d.markers = {gauss_marker(false)};
  SubjectData a, b;
  a.id = "A";
  a.obs = {{{0.0, 0.0}}};
  b.id = "B";
  b.obs = {{{0.0, 1.0}, {1.0, 3.0}}};
  d.subjects = {a, b};
  ValidatedDataset data = ValidatedDataset::validate(d);

  const int M = 600;
  std::vector<MarkerSpec> mk = {gauss_marker(false)};
  auto drifting = [&](double mu_off, double phi_off) {
    ChainSample s;
    s.layout = ParamLayout(mk, 1, 1);
    s.K = 1;
    s.q = 1;
    s.N = 2;
    s.draws.resize(M, s.layout.size());
    for (int m = 0; m < M; ++m) {
      s.draws(m, 0) = 1.0;                     // w1
      s.draws(m, 1) = mu_off + 0.05 * m;       // mu1_1
      s.draws(m, 2) = 0.3 + 0.0005 * m;        // d1_1_1
      s.draws(m, 3) = phi_off + 0.0002 * m;    // phi_g
      s.draws(m, 4) = 1.0;                     // xi_1
    }
    return s;
  };
  ChainSample ca = drifting(0.20, 0.30);
  ChainSample cb = drifting(0.25, 0.32);
  MargLikOptions opts;
  opts.method = MargLikMethod::closed_form;

  PedRecord r = penalized_expected_deviance(ca, cb, data, opts);
  CHECK(r.estimator == "two_pd_fallback");
  CHECK(r.degenerate_subjects == 2);
  CHECK(r.expected_deviance ==
        doctest::Approx(688.614633086884).epsilon(1e-10));
  CHECK(r.p_opt == doctest::Approx(244.408917124699).epsilon(1e-10));
  CHECK(r.ped == doctest::Approx(933.023550211583).epsilon(1e-10));
  CHECK(r.mc_se == doctest::Approx(16.499709408756).epsilon(1e-10));
}

TEST_CASE("mismatched chains are rejected") {
  ValidatedDataset data = three_subjects();
  ChainSample a = two_component_chain(
      {{0.60, 0.40, 0.5, 2.0, 0.30, 0.50, 0.10, 0.20, 1.0},
       {0.55, 0.45, 0.6, 1.9, 0.25, 0.45, 0.12, 0.25, 1.1}});
  ChainSample fewer = two_component_chain(
      {{0.60, 0.40, 0.5, 2.0, 0.30, 0.50, 0.10, 0.20, 1.0}});
  MargLikOptions opts;
  opts.method = MargLikMethod::closed_form;
  CHECK_THROWS_AS(penalized_expected_deviance(a, fewer, data, opts),
                  ValidationError);

  ChainSample other_k = a;
  other_k.K = 3;
  CHECK_THROWS_AS(penalized_expected_deviance(a, other_k, data, opts),
                  ValidationError);
}

TEST_CASE("model choice picks the smallest penalized deviance") {
  // published four-model comparison: the two-component model wins even
  // though K=3 has lower expected deviance
  std::vector<PedRecord> table(4);
  double vals[4][3] = {{14241.8, 36.1, 14277.9},
                       {14088.3, 75.8, 14164.1},
                       {14057.1, 126.0, 14183.1},
                       {17244.4, 5160.8, 22405.1}};
  for (int k = 0; k < 4; ++k) {
    table[k].K = k + 1;
    table[k].expected_deviance = vals[k][0];
    table[k].p_opt = vals[k][1];
    table[k].ped = vals[k][2];
    table[k].estimator = "importance";
  }
  CHECK(select_K(table) == 2);

  std::swap(table[0], table[3]);  // order must not matter
  CHECK(select_K(table) == 2);

  std::vector<PedRecord> tie(2);
  tie[0].K = 3;
  tie[0].ped = 10.0;
  tie[1].K = 2;
  tie[1].ped = 10.0;
  CHECK(select_K(tie) == 2);

  CHECK_THROWS_AS(select_K({}), ValidationError);
}

TEST_SUITE_END();
