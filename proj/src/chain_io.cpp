#include "longmix/chain_io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "longmix/version.hpp"

namespace longmix {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'X', 'P'};
constexpr std::uint16_t kAllocProbVersion = 1;

void put_u16(std::ofstream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int t = 0; t < 4; ++t) b[t] = static_cast<unsigned char>(v >> (8 * t));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t get_u16(std::ifstream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int t = 0; t < 4; ++t) v |= static_cast<std::uint32_t>(b[t]) << (8 * t);
  return v;
}

}  // namespace

void write_params_csv(const std::string& path, const ParamLayout& layout,
                      const Eigen::MatrixXd& draws) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  const std::vector<std::string>& names = layout.names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c) out << ',';
    out << names[c];
  }
  out << '\n';
  char buf[64];
  for (int m = 0; m < draws.rows(); ++m) {
    for (int c = 0; c < draws.cols(); ++c) {
      if (c) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", draws(m, c));
      out << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_params_csv(const std::string& path,
                                const ParamLayout& layout) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("'" + path + "' is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::string expected;
    for (std::size_t c = 0; c < layout.names().size(); ++c) {
      if (c) expected += ',';
      expected += layout.names()[c];
    }
    if (line != expected) {
      throw ValidationError("'" + path +
                            "': header does not match the model layout");
    }
  }
  std::vector<double> values;
  long rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.c_str();
    int cols = 0;
    for (;;) {
      char* end = nullptr;
      values.push_back(std::strtod(p, &end));
      if (end == p) {
        throw ValidationError("'" + path + "': bad number in row " +
                              std::to_string(rows + 1));
      }
      ++cols;
      p = end;
      if (*p == ',') {
        ++p;
      } else {
        break;
      }
    }
    if (cols != layout.size()) {
      throw ValidationError("'" + path + "': row " + std::to_string(rows + 1) +
                            " has " + std::to_string(cols) + " cells, expected " +
                            std::to_string(layout.size()));
    }
    ++rows;
  }
  Eigen::MatrixXd out(rows, layout.size());
  for (long m = 0; m < rows; ++m) {
    for (int c = 0; c < layout.size(); ++c) {
      out(m, c) = values[m * layout.size() + c];
    }
  }
  return out;
}

void write_allocprobs(const std::string& path, const AllocProbs& probs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out.write(kMagic, 4);
  put_u16(out, kAllocProbVersion);
  put_u16(out, static_cast<std::uint16_t>(probs.K));
  put_u32(out, static_cast<std::uint32_t>(probs.N));
  put_u32(out, static_cast<std::uint32_t>(probs.M));
  // Doubles are written as-is: this code only targets little-endian hosts.
  out.write(reinterpret_cast<const char*>(probs.values.data()),
            static_cast<std::streamsize>(probs.values.size() * sizeof(double)));
  if (!out) throw ValidationError("short write to '" + path + "'");
}

AllocProbs read_allocprobs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("'" + path + "': not an allocation probability file");
  }
  std::uint16_t version = get_u16(in);
  if (version != kAllocProbVersion) {
    throw ValidationError("'" + path + "': unsupported version " +
                          std::to_string(version));
  }
  std::uint16_t K = get_u16(in);
  std::uint32_t N = get_u32(in);
  std::uint32_t M = get_u32(in);
  AllocProbs out(static_cast<int>(N), static_cast<int>(K),
                 static_cast<int>(M));
  in.read(reinterpret_cast<char*>(out.values.data()),
          static_cast<std::streamsize>(out.values.size() * sizeof(double)));
  if (!in) throw ValidationError("'" + path + "': truncated payload");
  return out;
}

void write_fit_dir(const std::string& dir, const ChainSample& sample,
                   const ModelConfig& model,
                   const std::vector<std::string>& subject_ids,
                   const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  write_params_csv(dir + "/params.csv", sample.layout, sample.draws);
  write_allocprobs(dir + "/allocprob.bin", sample.allocprobs);

  nlohmann::json manifest;
  manifest["schema_version"] = kFitSchemaVersion;
  manifest["package_version"] = kVersion;
  manifest["model"] = model_config_to_json(model);
  manifest["K"] = sample.K;
  manifest["q"] = sample.q;
  manifest["n_subjects"] = sample.N;
  manifest["subjects"] = subject_ids;
  manifest["config"] = {
      {"keep", sample.config.keep},     {"thin", sample.config.thin},
      {"burnin", sample.config.burnin}, {"seed", sample.config.seed},
      {"threads", sample.config.threads}, {"adapt", sample.config.adapt},
      {"prior_only", sample.config.prior_only},
  };
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int t = 0; t < v.size(); ++t) a.push_back(v[t]);
    return a;
  };
  manifest["prior"] = {
      {"delta", sample.prior.delta},     {"xi", vec(sample.prior.xi)},
      {"c_diag", vec(sample.prior.c_diag)}, {"zeta", sample.prior.zeta},
      {"g_shape", sample.prior.g_shape}, {"h_rate", vec(sample.prior.h_rate)},
      {"alpha_var", sample.prior.alpha_var},
      {"phi_shape", sample.prior.phi_shape},
      {"phi_rate", sample.prior.phi_rate},
  };
  manifest["acceptance"] = {
      {"random_effects", sample.acceptance.random_effects},
      {"alpha", sample.acceptance.alpha},
  };
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    manifest[it.key()] = it.value();
  }
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw ValidationError("cannot write '" + dir + "/manifest.json'");
  out << manifest.dump(2) << '\n';
}

FitResult read_fit_dir(const std::string& dir) {
  std::ifstream min(dir + "/manifest.json");
  if (!min) {
    throw ValidationError("cannot open '" + dir +
                          "/manifest.json' (is this a fit directory?)");
  }
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + dir + "/manifest.json': " + std::string(e.what()));
  }

  FitResult out;
  out.manifest = manifest;
  out.model = parse_model_config(manifest.at("model"));

  ChainSample& s = out.sample;
  s.K = manifest.at("K").get<int>();
  s.q = manifest.at("q").get<int>();
  s.N = manifest.at("n_subjects").get<int>();
  s.layout = ParamLayout(out.model.markers, s.K, s.q);
  s.draws = read_params_csv(dir + "/params.csv", s.layout);
  s.allocprobs = read_allocprobs(dir + "/allocprob.bin");
  if (s.allocprobs.N != s.N || s.allocprobs.K != s.K ||
      s.allocprobs.M != s.draws.rows()) {
    throw ValidationError("'" + dir +
                          "': params.csv and allocprob.bin disagree in shape");
  }
  const nlohmann::json& c = manifest.at("config");
  s.config.keep = c.at("keep").get<int>();
  s.config.thin = c.at("thin").get<int>();
  s.config.burnin = c.at("burnin").get<int>();
  s.config.seed = c.at("seed").get<std::uint64_t>();
  s.config.threads = c.at("threads").get<int>();
  s.config.adapt = c.at("adapt").get<bool>();
  s.config.prior_only = c.at("prior_only").get<bool>();
  const nlohmann::json& p = manifest.at("prior");
  auto vec = [](const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t t = 0; t < a.size(); ++t) v[t] = a[t].get<double>();
    return v;
  };
  s.prior.delta = p.at("delta").get<double>();
  s.prior.xi = vec(p.at("xi"));
  s.prior.c_diag = vec(p.at("c_diag"));
  s.prior.zeta = p.at("zeta").get<double>();
  s.prior.g_shape = p.at("g_shape").get<double>();
  s.prior.h_rate = vec(p.at("h_rate"));
  s.prior.alpha_var = p.at("alpha_var").get<double>();
  s.prior.phi_shape = p.at("phi_shape").get<double>();
  s.prior.phi_rate = p.at("phi_rate").get<double>();
  s.acceptance.random_effects =
      manifest.at("acceptance").at("random_effects").get<double>();
  s.acceptance.alpha =
      manifest.at("acceptance").at("alpha").get<std::vector<double>>();
  out.subject_ids = manifest.at("subjects").get<std::vector<std::string>>();
  return out;
}

}  // namespace longmix
