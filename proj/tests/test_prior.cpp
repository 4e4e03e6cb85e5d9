#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "longmix/data.hpp"
#include "longmix/errors.hpp"
#include "longmix/prior.hpp"
#include "longmix/stats.hpp"

using namespace longmix;

TEST_SUITE_BEGIN("prior");

namespace {

Dataset prior_dataset() {
  // one gaussian (random intercept+slope) and one poisson (random intercept,
  // fixed slope) marker -> q = 3, alpha on marker 2, phi on marker 1
  Dataset d;
  MarkerSpec g;
  g.name = "g";
  g.family = Family::gaussian;
  g.random = {Covariate::parse("intercept"), Covariate::parse("time")};
  MarkerSpec p;
  p.name = "p";
  p.family = Family::poisson;
  p.fixed = {Covariate::parse("time")};
  p.random = {Covariate::parse("intercept")};
  d.markers = {g, p};
  SubjectData s;
  s.id = "s1";
  s.obs = {{{0.0, 1.0}, {1.0, 2.0}}, {{0.0, 3.0}}};
  d.subjects = {s};
  return d;
}

}  // namespace

TEST_CASE("defaults follow the midrange and range rules") {
  Eigen::MatrixXd crude(4, 2);
  crude << 0.0, 5.0, 2.0, 6.0, 4.0, 9.0, 1.0, 8.0;
  // ranges: col0 -> 4, col1 -> 4; midranges: 2.0, 7.0
  std::vector<std::string> warnings;
  PriorSpec spec = default_hyperparameters(crude, 2, {}, &warnings);
  CHECK(warnings.empty());
  CHECK(spec.delta == 1.0);
  CHECK(spec.xi[0] == doctest::Approx(2.0));
  CHECK(spec.xi[1] == doctest::Approx(7.0));
  CHECK(spec.c_diag[0] == doctest::Approx(16.0));
  CHECK(spec.c_diag[1] == doctest::Approx(16.0));
  CHECK(spec.zeta == doctest::Approx(3.0));  // q + 1
  CHECK(spec.g_shape == doctest::Approx(0.2));
  CHECK(spec.h_rate[0] == doctest::Approx(10.0 / 16.0));
  CHECK(spec.alpha_var == doctest::Approx(1e4));
  CHECK(spec.phi_shape == doctest::Approx(1.0));
  CHECK(spec.phi_rate == doctest::Approx(0.005));
}

TEST_CASE("degenerate ranges fall back to one and warn") {
  Eigen::MatrixXd crude(3, 2);
  crude << 1.0, 0.0, 1.0, 2.0, 1.0, 4.0;  // col0 constant
  std::vector<std::string> warnings;
  PriorSpec spec = default_hyperparameters(crude, 2, {}, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(spec.c_diag[0] == doctest::Approx(1.0));
  CHECK(spec.h_rate[0] == doctest::Approx(10.0));
  CHECK(spec.c_diag[1] == doctest::Approx(16.0));
}

TEST_CASE("overrides win field by field") {
  Eigen::MatrixXd crude(3, 1);
  crude << 0.0, 1.0, 2.0;
  PriorOverrides ov;
  ov.delta = 2.5;
  ov.zeta = 7.0;
  Eigen::VectorXd xi(1);
  xi << -3.0;
  ov.xi = xi;
  std::vector<std::string> warnings;
  PriorSpec spec = default_hyperparameters(crude, 3, ov, &warnings);
  CHECK(spec.delta == 2.5);
  CHECK(spec.zeta == 7.0);
  CHECK(spec.xi[0] == -3.0);
  CHECK(spec.c_diag[0] == doctest::Approx(4.0));  // still the default
}

TEST_CASE("invalid hyperparameters are rejected") {
  Eigen::MatrixXd crude(3, 2);
  crude << 0.0, 5.0, 2.0, 6.0, 4.0, 9.0;
  PriorOverrides ov;
  ov.delta = 0.0;
  CHECK_THROWS_AS(default_hyperparameters(crude, 2, ov, nullptr),
                  ValidationError);
  ov = {};
  ov.zeta = 1.0;  // must exceed q - 1 = 1
  CHECK_THROWS_AS(default_hyperparameters(crude, 2, ov, nullptr),
                  ValidationError);
  ov = {};
  Eigen::VectorXd c(2);
  c << 1.0, -1.0;
  ov.c_diag = c;
  CHECK_THROWS_AS(default_hyperparameters(crude, 2, ov, nullptr),
                  ValidationError);
}

TEST_CASE("log prior factorizes over its blocks") {
  ValidatedDataset data = ValidatedDataset::validate(prior_dataset());
  int q = data.q();
  REQUIRE(q == 3);

  PriorSpec spec;
  spec.delta = 1.0;
  spec.xi = Eigen::VectorXd::Zero(q);
  spec.c_diag = Eigen::VectorXd::Constant(q, 4.0);
  spec.zeta = q + 1.0;
  spec.g_shape = 0.2;
  spec.h_rate = Eigen::VectorXd::Constant(q, 0.625);
  spec.alpha_var = 1e4;
  spec.phi_shape = 1.0;
  spec.phi_rate = 0.005;

  Eigen::VectorXd w(2);
  w << 0.3, 0.7;
  Eigen::VectorXd mu1 = Eigen::VectorXd::Constant(q, 0.5);
  Eigen::VectorXd mu2 = Eigen::VectorXd::Constant(q, -0.25);
  Eigen::MatrixXd d1 = Eigen::MatrixXd::Identity(q, q) * 0.8;
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Identity(q, q) * 1.3;
  d2(0, 1) = d2(1, 0) = 0.2;
  MixtureParams mix = MixtureParams::create(
      w, {mu1, mu2},
      {SpdMatrix::from_matrix(d1), SpdMatrix::from_matrix(d2)});
  Eigen::VectorXd xi_scale(q);
  xi_scale << 0.5, 1.0, 2.0;
  GlmmParams glmm;
  Eigen::VectorXd a0(0), a1(1);
  a1 << 0.04;
  glmm.alpha = {a0, a1};
  glmm.phi = {0.2, 1.0};

  double total = log_prior(data, mix, xi_scale, glmm, spec);

  // independent recomputation, term by term
  double expect = log_dirichlet_pdf(w, spec.delta);
  expect += log_mvn_diag_pdf(mu1, spec.xi, spec.c_diag);
  expect += log_mvn_diag_pdf(mu2, spec.xi, spec.c_diag);
  SpdMatrix xi_inv =
      SpdMatrix::diagonal(xi_scale.cwiseInverse());
  expect += log_wishart_pdf(SpdMatrix::from_matrix(d1.inverse()), spec.zeta,
                            xi_inv);
  expect += log_wishart_pdf(SpdMatrix::from_matrix(d2.inverse()), spec.zeta,
                            xi_inv);
  for (int j = 0; j < q; ++j) {
    expect += log_gamma_pdf(xi_scale[j], spec.g_shape, spec.h_rate[j]);
  }
  expect += log_normal_pdf(0.04, 0.0, spec.alpha_var);
  expect += log_inv_gamma_pdf(0.2, spec.phi_shape, spec.phi_rate);

  CHECK(total == doctest::Approx(expect).epsilon(1e-12));
}

TEST_SUITE_END();
