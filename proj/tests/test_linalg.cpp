#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "longmix/errors.hpp"
#include "longmix/linalg.hpp"

using namespace longmix;

TEST_SUITE_BEGIN("linalg");

TEST_CASE("spd factorization reproduces determinant and solves") {
  Eigen::MatrixXd m(3, 3);
  m << 2.0, 0.3, 0.0, 0.3, 1.5, -0.2, 0.0, -0.2, 1.0;
  SpdMatrix s = SpdMatrix::from_matrix(m);
  CHECK(s.dim() == 3);
  CHECK_FALSE(s.jitter_applied());
  // numpy.linalg.slogdet -> 1.0402767116551463 (det 2.83)
  CHECK(s.log_det() == doctest::Approx(1.0402767116551463).epsilon(1e-12));

  Eigen::VectorXd rhs(3);
  rhs << 1.0, -2.0, 0.5;
  Eigen::VectorXd x = s.solve(rhs);
  CHECK((m * x - rhs).norm() < 1e-12);
  CHECK(s.quad_form_inv(rhs) == doctest::Approx(rhs.dot(x)).epsilon(1e-12));
  CHECK((s.inverse() * m - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
  CHECK((s.chol_lower() * s.chol_lower().transpose() - m).norm() < 1e-12);
}

TEST_CASE("asymmetric input is symmetrized") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.31, 0.29, 1.0;
  SpdMatrix s = SpdMatrix::from_matrix(m);
  CHECK(s.mat()(0, 1) == doctest::Approx(0.30));
  CHECK(s.mat()(1, 0) == doctest::Approx(0.30));
}

TEST_CASE("near-singular input is rescued by one jitter step") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0;  // rank one
  SpdMatrix s = SpdMatrix::from_matrix(m, 1e-6);
  CHECK(s.jitter_applied());
  CHECK(s.log_det() > -30.0);
}

TEST_CASE("indefinite input throws") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(SpdMatrix::from_matrix(m), NumericalError);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Constant(2, 2, std::nan(""));
  CHECK_THROWS_AS(SpdMatrix::from_matrix(nan), NumericalError);
}

TEST_CASE("log_sum_exp is stable and handles empty tails") {
  Eigen::VectorXd v(3);
  v << -1000.0, -1001.0, -1002.0;
  // log(exp(0)+exp(-1)+exp(-2)) - 1000
  CHECK(log_sum_exp(v) ==
        doctest::Approx(-1000.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-2.0)))
            .epsilon(1e-14));
  Eigen::VectorXd inf = Eigen::VectorXd::Constant(
      2, -std::numeric_limits<double>::infinity());
  CHECK(log_sum_exp(inf) == -std::numeric_limits<double>::infinity());
  Eigen::VectorXd one(1);
  one << 3.25;
  CHECK(log_sum_exp(one) == doctest::Approx(3.25));
}

TEST_CASE("vech and unvech are inverse on the lower triangle") {
  Eigen::MatrixXd m(3, 3);
  m << 4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0;
  Eigen::VectorXd v = vech(m);
  REQUIRE(v.size() == 6);
  // column-major lower triangle: (1,1),(2,1),(3,1),(2,2),(3,2),(3,3)
  CHECK(v[0] == 4.0);
  CHECK(v[1] == 1.0);
  CHECK(v[2] == 0.5);
  CHECK(v[3] == 3.0);
  CHECK(v[4] == -0.2);
  CHECK(v[5] == 2.0);
  CHECK((unvech(v) - m).norm() == 0.0);
}

TEST_SUITE_END();
