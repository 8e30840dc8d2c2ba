#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "sca/dataset.hpp"
#include "sca/losses.hpp"

namespace sca {

struct StageConfig {
  int iterations = 1000;
  int batch_size = 4;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int log_interval = 10;
};

struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "runs/default";
  std::uint64_t seed = 0;  // master seed: initialisation and sampling
  DatasetSpec data;        // image size, d_max_full, split sizes, data seed

  StageConfig pretrain{1000, 4, 1e-4, 0.9, 0.999, 10};
  int pretrain_val_interval = 100;

  StageConfig translator{2000, 4, 1e-4, 0.0, 0.9, 10};
  double translator_lr_c = 4e-4;
  bool use_sca = true;

  StageConfig adapt{1000, 4, 1e-4, 0.9, 0.999, 10};

  LossWeights weights;
  int eval_samples = 0;  // 0 = whole split

  void validate() const;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys and malformed
// values raise ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);
// key -> current value, for every recognised key.
std::map<std::string, std::string> config_entries(const RunConfig& c);
std::string format_config(const RunConfig& c);

}  // namespace sca
