#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "longmix/errors.hpp"
#include "longmix/families.hpp"

namespace longmix {

// A design column evaluated at an observation: the constant 1, the
// observation time (optionally raised to a power), or a subject attribute.
struct Covariate {
  enum class Kind { intercept, time, time_power, attribute };
  Kind kind = Kind::intercept;
  double power = 1.0;     // for time_power
  std::string attr;       // for attribute

  // Accepts "intercept", "time", "time^P" (P a positive number), "attr:NAME".
  static Covariate parse(const std::string& spec);
  std::string name() const;
  double value(double time, const std::map<std::string, double>& attrs) const;
  bool operator==(const Covariate& o) const;
};

struct MarkerSpec {
  std::string name;
  Family family = Family::gaussian;
  std::vector<Covariate> fixed;    // columns of x_i(t)
  std::vector<Covariate> random;   // columns of z_i(t); must be non-empty
};

struct Observation {
  double time = 0.0;
  double value = 0.0;
};

struct SubjectData {
  std::string id;
  std::map<std::string, double> attributes;
  // obs[r] holds the observations of marker r, in input order.
  std::vector<std::vector<Observation>> obs;
};

struct Dataset {
  std::vector<MarkerSpec> markers;
  std::vector<SubjectData> subjects;
};

// Dataset that passed validation, with per-subject design matrices built so
// the samplers and likelihood code never touch raw records.  The stacked
// random-effect vector b_i has length q = sum_r q_r with marker r occupying
// columns [q_offset(r), q_offset(r) + q_r).
class ValidatedDataset {
 public:
  // Checks structural and per-family rules and precomputes designs.
  // Throws ValidationError with the offending subject/marker in the message.
  static ValidatedDataset validate(Dataset raw);

  const Dataset& raw() const { return raw_; }
  int n_subjects() const { return static_cast<int>(raw_.subjects.size()); }
  int n_markers() const { return static_cast<int>(raw_.markers.size()); }
  const MarkerSpec& marker(int r) const { return raw_.markers[r]; }
  const std::string& subject_id(int i) const { return raw_.subjects[i].id; }

  int q() const { return q_; }
  int q_r(int r) const { return static_cast<int>(raw_.markers[r].random.size()); }
  int q_offset(int r) const { return q_offset_[r]; }
  int p_r(int r) const { return static_cast<int>(raw_.markers[r].fixed.size()); }

  int total_obs() const { return total_obs_; }
  int n_obs(int i) const { return n_obs_subject_[i]; }
  int n_obs(int i, int r) const { return static_cast<int>(y_[i][r].size()); }

  const Eigen::VectorXd& y(int i, int r) const { return y_[i][r]; }
  const Eigen::MatrixXd& x(int i, int r) const { return x_[i][r]; }
  const Eigen::MatrixXd& z(int i, int r) const { return z_[i][r]; }

  bool subject_all_gaussian(int i) const { return subject_all_gaussian_[i]; }
  bool all_gaussian() const { return all_gaussian_; }

  // Index of a marker by name; -1 when absent.
  int marker_index(const std::string& name) const;

 private:
  Dataset raw_;
  int q_ = 0;
  int total_obs_ = 0;
  std::vector<int> q_offset_;
  std::vector<int> n_obs_subject_;
  std::vector<std::vector<Eigen::VectorXd>> y_;   // [subject][marker]
  std::vector<std::vector<Eigen::MatrixXd>> x_;   // n_ir x p_r
  std::vector<std::vector<Eigen::MatrixXd>> z_;   // n_ir x q_r
  std::vector<bool> subject_all_gaussian_;
  bool all_gaussian_ = true;
};

// eta = x' alpha + z' b for one observation row.
double linear_predictor(const Eigen::RowVectorXd& x_row,
                        const Eigen::VectorXd& alpha,
                        const Eigen::RowVectorXd& z_row,
                        const Eigen::VectorXd& b_block);

// Long-format CSV with header subject,marker,time,value.  Markers come from
// the model configuration; rows naming unknown markers are an error.
// Subjects appear in order of first occurrence.
Dataset read_long_csv(const std::string& path,
                      const std::vector<MarkerSpec>& markers);

// Optional per-subject attributes: header subject,<name>,...; numeric cells.
void read_attributes_csv(const std::string& path, Dataset* data);

// Writes the observations of a dataset in the long format read_long_csv
// accepts, and truth/attributes helpers used by the simulator and tests.
void write_long_csv(const std::string& path, const Dataset& data);

}  // namespace longmix
