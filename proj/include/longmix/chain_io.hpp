#pragma once

#include <string>

#include <json.hpp>

#include "longmix/model_config.hpp"
#include "longmix/sampler.hpp"

namespace longmix {

// On-disk layout of a fit directory:
//   params.csv     one kept draw per row, %.17g so values round-trip exactly
//   allocprob.bin  allocation probability tensor (16-byte header: the magic
//                  "LMXP", u16 version, u16 K, u32 N, u32 M, little endian,
//                  then N*K*M doubles laid out [((i*K)+k)*M + m])
//   manifest.json  model, prior, config, acceptance rates, provenance

void write_params_csv(const std::string& path, const ParamLayout& layout,
                      const Eigen::MatrixXd& draws);
Eigen::MatrixXd read_params_csv(const std::string& path,
                                const ParamLayout& layout);

void write_allocprobs(const std::string& path, const AllocProbs& probs);
AllocProbs read_allocprobs(const std::string& path);

struct FitResult {
  ChainSample sample;
  ModelConfig model;
  nlohmann::json manifest;
  std::vector<std::string> subject_ids;
};

// Writes params.csv, allocprob.bin, and manifest.json into dir (created if
// missing).  extra is merged into the manifest (command line, data path...).
void write_fit_dir(const std::string& dir, const ChainSample& sample,
                   const ModelConfig& model,
                   const std::vector<std::string>& subject_ids,
                   const nlohmann::json& extra = {});

FitResult read_fit_dir(const std::string& dir);

}  // namespace longmix
