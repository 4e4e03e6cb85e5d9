#include "longmix/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace longmix {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse " + what + " from '" + s + "'");
  }
}

bool is_nonneg_integer(double v) {
  return v >= 0.0 && std::abs(v - std::round(v)) <= 1e-9;
}

}  // namespace

Covariate Covariate::parse(const std::string& spec) {
  std::string s = strip(spec);
  Covariate c;
  if (s == "intercept") {
    c.kind = Kind::intercept;
    return c;
  }
  if (s == "time") {
    c.kind = Kind::time;
    return c;
  }
  if (s.rfind("time^", 0) == 0) {
    c.kind = Kind::time_power;
    c.power = parse_double(s.substr(5), "covariate power");
    if (!(c.power > 0.0)) {
      throw ValidationError("covariate '" + s + "': power must be positive");
    }
    return c;
  }
  if (s.rfind("attr:", 0) == 0) {
    c.kind = Kind::attribute;
    c.attr = strip(s.substr(5));
    if (c.attr.empty()) {
      throw ValidationError("covariate '" + s + "': empty attribute name");
    }
    return c;
  }
  throw ValidationError(
      "unknown covariate '" + s +
      "' (expected intercept, time, time^P, or attr:NAME)");
}

std::string Covariate::name() const {
  switch (kind) {
    case Kind::intercept: return "intercept";
    case Kind::time: return "time";
    case Kind::time_power: {
      std::ostringstream os;
      os << "time^" << power;
      return os.str();
    }
    case Kind::attribute: return "attr:" + attr;
  }
  return "?";
}

double Covariate::value(double time,
                        const std::map<std::string, double>& attrs) const {
  switch (kind) {
    case Kind::intercept: return 1.0;
    case Kind::time: return time;
    case Kind::time_power: return std::pow(time, power);
    case Kind::attribute: {
      auto it = attrs.find(attr);
      if (it == attrs.end()) {
        throw ValidationError("missing attribute '" + attr + "'");
      }
      return it->second;
    }
  }
  return 0.0;
}

bool Covariate::operator==(const Covariate& o) const {
  return kind == o.kind && power == o.power && attr == o.attr;
}

double linear_predictor(const Eigen::RowVectorXd& x_row,
                        const Eigen::VectorXd& alpha,
                        const Eigen::RowVectorXd& z_row,
                        const Eigen::VectorXd& b_block) {
  double eta = z_row.dot(b_block);
  if (alpha.size() > 0) eta += x_row.dot(alpha);
  return eta;
}

ValidatedDataset ValidatedDataset::validate(Dataset raw) {
  if (raw.markers.empty()) throw ValidationError("no markers defined");
  if (raw.subjects.empty()) throw ValidationError("no subjects in data");

  ValidatedDataset out;
  int R = static_cast<int>(raw.markers.size());

  {
    std::unordered_map<std::string, int> seen;
    for (int r = 0; r < R; ++r) {
      const MarkerSpec& m = raw.markers[r];
      if (m.name.empty()) throw ValidationError("marker with empty name");
      if (!seen.emplace(m.name, r).second) {
        throw ValidationError("duplicate marker '" + m.name + "'");
      }
      if (m.random.empty()) {
        throw ValidationError("marker '" + m.name +
                              "': needs at least one random covariate");
      }
      for (const Covariate& f : m.fixed) {
        if (std::find(m.random.begin(), m.random.end(), f) != m.random.end()) {
          throw ValidationError("marker '" + m.name + "': covariate '" +
                                f.name() +
                                "' appears as both fixed and random");
        }
      }
    }
  }

  out.q_offset_.resize(R);
  for (int r = 0; r < R; ++r) {
    out.q_offset_[r] = out.q_;
    out.q_ += static_cast<int>(raw.markers[r].random.size());
  }

  int N = static_cast<int>(raw.subjects.size());
  {
    std::unordered_map<std::string, int> seen;
    for (int i = 0; i < N; ++i) {
      const SubjectData& s = raw.subjects[i];
      if (s.id.empty()) throw ValidationError("subject with empty id");
      if (!seen.emplace(s.id, i).second) {
        throw ValidationError("duplicate subject id '" + s.id + "'");
      }
      if (static_cast<int>(s.obs.size()) != R) {
        throw ValidationError("subject '" + s.id +
                              "': observation lists do not match markers");
      }
    }
  }

  out.y_.resize(N);
  out.x_.resize(N);
  out.z_.resize(N);
  out.n_obs_subject_.assign(N, 0);
  out.subject_all_gaussian_.assign(N, true);

  for (int i = 0; i < N; ++i) {
    const SubjectData& s = raw.subjects[i];
    out.y_[i].resize(R);
    out.x_[i].resize(R);
    out.z_[i].resize(R);
    for (int r = 0; r < R; ++r) {
      const MarkerSpec& m = raw.markers[r];
      const std::vector<Observation>& obs = s.obs[r];
      int n = static_cast<int>(obs.size());
      int p = static_cast<int>(m.fixed.size());
      int qr = static_cast<int>(m.random.size());
      Eigen::VectorXd y(n);
      Eigen::MatrixXd x(n, p), z(n, qr);
      for (int j = 0; j < n; ++j) {
        const Observation& o = obs[j];
        std::string where =
            "subject '" + s.id + "', marker '" + m.name + "'";
        if (!std::isfinite(o.time)) {
          throw ValidationError(where + ": non-finite time");
        }
        if (!std::isfinite(o.value)) {
          throw ValidationError(where + ": non-finite value");
        }
        switch (m.family) {
          case Family::gaussian:
            break;
          case Family::poisson:
            if (!is_nonneg_integer(o.value)) {
              throw ValidationError(where +
                                    ": poisson value must be a non-negative "
                                    "integer, got " +
                                    std::to_string(o.value));
            }
            break;
          case Family::bernoulli:
            if (o.value != 0.0 && o.value != 1.0) {
              throw ValidationError(where +
                                    ": bernoulli value must be 0 or 1, got " +
                                    std::to_string(o.value));
            }
            break;
        }
        y[j] = o.value;
        for (int c = 0; c < p; ++c) {
          try {
            x(j, c) = m.fixed[c].value(o.time, s.attributes);
          } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
          }
        }
        for (int c = 0; c < qr; ++c) {
          try {
            z(j, c) = m.random[c].value(o.time, s.attributes);
          } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
          }
        }
      }
      if (!x.allFinite() || !z.allFinite()) {
        throw ValidationError("subject '" + s.id + "', marker '" + m.name +
                              "': non-finite design entries");
      }
      out.y_[i][r] = std::move(y);
      out.x_[i][r] = std::move(x);
      out.z_[i][r] = std::move(z);
      out.n_obs_subject_[i] += n;
      out.total_obs_ += n;
      if (n > 0 && m.family != Family::gaussian) {
        out.subject_all_gaussian_[i] = false;
        out.all_gaussian_ = false;
      }
    }
    if (out.n_obs_subject_[i] == 0) {
      throw ValidationError("subject '" + s.id + "': no observations");
    }
  }

  out.raw_ = std::move(raw);
  return out;
}

int ValidatedDataset::marker_index(const std::string& name) const {
  for (int r = 0; r < n_markers(); ++r) {
    if (raw_.markers[r].name == name) return r;
  }
  return -1;
}

Dataset read_long_csv(const std::string& path,
                      const std::vector<MarkerSpec>& markers) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");

  std::unordered_map<std::string, int> marker_index;
  for (std::size_t r = 0; r < markers.size(); ++r) {
    marker_index[markers[r].name] = static_cast<int>(r);
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("data file '" + path + "' is empty");
  }
  std::vector<std::string> header = split_csv_line(strip(line));
  if (header.size() != 4 || strip(header[0]) != "subject" ||
      strip(header[1]) != "marker" || strip(header[2]) != "time" ||
      strip(header[3]) != "value") {
    throw ValidationError("data file '" + path +
                          "': header must be subject,marker,time,value");
  }

  Dataset out;
  out.markers = markers;
  std::unordered_map<std::string, int> subject_index;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    std::vector<std::string> cells = split_csv_line(stripped);
    if (cells.size() != 4) {
      throw ValidationError("data file '" + path + "' line " +
                            std::to_string(line_no) + ": expected 4 cells");
    }
    std::string sid = strip(cells[0]);
    std::string mname = strip(cells[1]);
    auto mit = marker_index.find(mname);
    if (mit == marker_index.end()) {
      throw ValidationError("data file '" + path + "' line " +
                            std::to_string(line_no) + ": unknown marker '" +
                            mname + "'");
    }
    auto [sit, inserted] =
        subject_index.emplace(sid, static_cast<int>(out.subjects.size()));
    if (inserted) {
      SubjectData s;
      s.id = sid;
      s.obs.resize(markers.size());
      out.subjects.push_back(std::move(s));
    }
    Observation o;
    o.time = parse_double(strip(cells[2]),
                          "time (line " + std::to_string(line_no) + ")");
    o.value = parse_double(strip(cells[3]),
                           "value (line " + std::to_string(line_no) + ")");
    out.subjects[sit->second].obs[mit->second].push_back(o);
  }
  return out;
}

void read_attributes_csv(const std::string& path, Dataset* data) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open attributes file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("attributes file '" + path + "' is empty");
  }
  std::vector<std::string> header = split_csv_line(strip(line));
  if (header.size() < 2 || strip(header[0]) != "subject") {
    throw ValidationError(
        "attributes file '" + path +
        "': header must be subject,<name>[,<name>...]");
  }
  std::unordered_map<std::string, SubjectData*> by_id;
  for (SubjectData& s : data->subjects) by_id[s.id] = &s;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    std::vector<std::string> cells = split_csv_line(stripped);
    if (cells.size() != header.size()) {
      throw ValidationError("attributes file '" + path + "' line " +
                            std::to_string(line_no) +
                            ": cell count does not match header");
    }
    auto it = by_id.find(strip(cells[0]));
    if (it == by_id.end()) continue;  // attributes for unseen subjects are fine
    for (std::size_t c = 1; c < cells.size(); ++c) {
      it->second->attributes[strip(header[c])] = parse_double(
          strip(cells[c]), "attribute (line " + std::to_string(line_no) + ")");
    }
  }
}

void write_long_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write data file '" + path + "'");
  out << "subject,marker,time,value\n";
  char buf[64];
  for (const SubjectData& s : data.subjects) {
    for (std::size_t r = 0; r < data.markers.size(); ++r) {
      for (const Observation& o : s.obs[r]) {
        out << s.id << ',' << data.markers[r].name << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", o.time);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", o.value);
        out << buf << '\n';
      }
    }
  }
}

}  // namespace longmix
