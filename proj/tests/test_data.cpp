#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "longmix/data.hpp"
#include "longmix/errors.hpp"

using namespace longmix;

TEST_SUITE_BEGIN("data");

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

SubjectData subject(const std::string& id, int n_markers) {
  SubjectData s;
  s.id = id;
  s.obs.resize(n_markers);
  return s;
}

Dataset tiny_two_marker() {
  Dataset d;
  d.markers = {marker("resp", Family::gaussian, {}, {"intercept", "time"}),
               marker("flag", Family::bernoulli, {"time"}, {"intercept"})};
  SubjectData a = subject("a", 2);
  a.obs[0] = {{0.0, 1.2}, {1.0, 1.4}};
  a.obs[1] = {{0.5, 1.0}};
  SubjectData b = subject("b", 2);
  b.obs[0] = {{0.0, -0.3}};
  b.obs[1] = {{2.0, 0.0}, {3.0, 1.0}};
  d.subjects = {a, b};
  return d;
}

std::string temp_path(const std::string& name) {
  return std::string("/tmp/longmix_data_test_") + name;
}

}  // namespace

TEST_CASE("covariate parsing accepts the four kinds") {
  CHECK(Covariate::parse("intercept").name() == "intercept");
  CHECK(Covariate::parse("time").name() == "time");
  CHECK(Covariate::parse("time^2").name() == "time^2");
  CHECK(Covariate::parse(" attr:age ").name() == "attr:age");
  CHECK_THROWS_AS(Covariate::parse("slope"), ValidationError);
  CHECK_THROWS_AS(Covariate::parse("time^0"), ValidationError);
  CHECK_THROWS_AS(Covariate::parse("attr:"), ValidationError);

  std::map<std::string, double> attrs = {{"age", 61.0}};
  CHECK(Covariate::parse("intercept").value(5.0, attrs) == 1.0);
  CHECK(Covariate::parse("time").value(5.0, attrs) == 5.0);
  CHECK(Covariate::parse("time^2").value(5.0, attrs) == 25.0);
  CHECK(Covariate::parse("attr:age").value(5.0, attrs) == 61.0);
  CHECK_THROWS_AS(Covariate::parse("attr:bmi").value(5.0, attrs),
                  ValidationError);
}

TEST_CASE("validation builds designs and the shared layout") {
  ValidatedDataset v = ValidatedDataset::validate(tiny_two_marker());
  CHECK(v.n_subjects() == 2);
  CHECK(v.n_markers() == 2);
  CHECK(v.q() == 3);           // 2 raneffs for resp + 1 for flag
  CHECK(v.q_r(0) == 2);
  CHECK(v.q_r(1) == 1);
  CHECK(v.q_offset(0) == 0);
  CHECK(v.q_offset(1) == 2);
  CHECK(v.p_r(0) == 0);
  CHECK(v.p_r(1) == 1);
  CHECK(v.total_obs() == 6);
  CHECK(v.n_obs(0) == 3);
  CHECK(v.n_obs(0, 0) == 2);
  CHECK(v.subject_id(1) == "b");
  CHECK_FALSE(v.all_gaussian());
  CHECK_FALSE(v.subject_all_gaussian(0));
  CHECK(v.marker_index("flag") == 1);
  CHECK(v.marker_index("nope") == -1);

  // design rows: z for resp is [1, t]; x for flag is [t]
  CHECK(v.z(0, 0)(1, 1) == 1.0);
  CHECK(v.y(0, 0)[1] == 1.4);
  CHECK(v.x(0, 1)(0, 0) == 0.5);
}

TEST_CASE("validation rejects malformed inputs") {
  CHECK_THROWS_AS(ValidatedDataset::validate(Dataset{}), ValidationError);

  Dataset d = tiny_two_marker();
  d.markers[1].name = "resp";  // duplicate
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);

  d = tiny_two_marker();
  d.markers[0].random.clear();
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);

  d = tiny_two_marker();
  d.markers[1].fixed = {Covariate::parse("intercept")};
  d.markers[1].random = {Covariate::parse("intercept")};  // overlap
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);

  d = tiny_two_marker();
  d.subjects[1].id = "a";  // duplicate
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);

  d = tiny_two_marker();
  d.subjects[0].obs.resize(1);  // marker list mismatch
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);

  d = tiny_two_marker();
  d.subjects[0].obs[0].clear();
  d.subjects[0].obs[1].clear();  // empty subject
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);

  d = tiny_two_marker();
  d.subjects[0].obs[0][0].value = std::nan("");
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);

  d = tiny_two_marker();
  d.subjects[0].obs[0][0].time = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);
}

TEST_CASE("family-specific value rules") {
  Dataset d;
  d.markers = {marker("cnt", Family::poisson, {}, {"intercept"})};
  SubjectData s = subject("s", 1);
  s.obs[0] = {{0.0, 3.0}};
  d.subjects = {s};
  CHECK_NOTHROW(ValidatedDataset::validate(d));

  d.subjects[0].obs[0][0].value = -1.0;
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);
  d.subjects[0].obs[0][0].value = 2.5;
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);
  d.subjects[0].obs[0][0].value = 3.0 + 1e-12;  // integer within tolerance
  CHECK_NOTHROW(ValidatedDataset::validate(d));

  d.markers[0].family = Family::bernoulli;
  d.subjects[0].obs[0][0].value = 1.0;
  CHECK_NOTHROW(ValidatedDataset::validate(d));
  d.subjects[0].obs[0][0].value = 0.5;
  CHECK_THROWS_AS(ValidatedDataset::validate(d), ValidationError);
}

TEST_CASE("validation is idempotent") {
  ValidatedDataset v1 = ValidatedDataset::validate(tiny_two_marker());
  ValidatedDataset v2 = ValidatedDataset::validate(v1.raw());
  CHECK(v1.q() == v2.q());
  CHECK(v1.total_obs() == v2.total_obs());
  CHECK((v1.z(1, 0) - v2.z(1, 0)).norm() == 0.0);
}

TEST_CASE("linear predictor combines fixed and random parts") {
  Eigen::RowVectorXd x(1), z(2);
  x << 12.2;
  z << 1.0, 2.0;
  Eigen::VectorXd alpha(1), b(2);
  alpha << 0.0280;
  b << -4.33, 0.0;
  // 0.0280 * 12.2 - 4.33 = -3.9884
  CHECK(linear_predictor(x, alpha, z, b) ==
        doctest::Approx(-3.9884).epsilon(1e-12));
}

TEST_CASE("long csv round trip preserves values and subject order") {
  Dataset d = tiny_two_marker();
  d.subjects[0].obs[0][0].value = 0.1234567890123456789;  // needs %.17g
  std::string path = temp_path("roundtrip.csv");
  write_long_csv(path, d);
  Dataset back = read_long_csv(path, d.markers);
  REQUIRE(back.subjects.size() == 2);
  CHECK(back.subjects[0].id == "a");
  CHECK(back.subjects[1].id == "b");
  CHECK(back.subjects[0].obs[0][0].value == d.subjects[0].obs[0][0].value);
  CHECK(back.subjects[1].obs[1][1].time == 3.0);
  std::remove(path.c_str());
}

TEST_CASE("long csv reader rejects bad headers and unknown markers") {
  std::string path = temp_path("bad.csv");
  std::vector<MarkerSpec> mk = {
      marker("resp", Family::gaussian, {}, {"intercept"})};
  {
    std::ofstream out(path);
    out << "subject,time,value\n";
  }
  CHECK_THROWS_AS(read_long_csv(path, mk), ValidationError);
  {
    std::ofstream out(path);
    out << "subject,marker,time,value\na,other,0,1\n";
  }
  CHECK_THROWS_WITH_AS(read_long_csv(path, mk),
                       doctest::Contains("line 2"), ValidationError);
  {
    std::ofstream out(path);
    out << "subject,marker,time,value\na,resp,zero,1\n";
  }
  CHECK_THROWS_AS(read_long_csv(path, mk), ValidationError);
  CHECK_THROWS_AS(read_long_csv("/nonexistent/x.csv", mk), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("attributes csv attaches values by subject id") {
  Dataset d = tiny_two_marker();
  std::string path = temp_path("attrs.csv");
  {
    std::ofstream out(path);
    out << "subject,age,score\na,61,1.5\nb,48,-0.25\nunseen,1,1\n";
  }
  read_attributes_csv(path, &d);
  CHECK(d.subjects[0].attributes.at("age") == 61.0);
  CHECK(d.subjects[1].attributes.at("score") == -0.25);
  std::remove(path.c_str());
}

TEST_SUITE_END();
