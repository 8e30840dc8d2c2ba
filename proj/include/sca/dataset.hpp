#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sca/synth.hpp"

namespace sca {

enum class Split { SourceTrain, SourceVal, TargetTrain, TargetTest };
const char* split_name(Split s);  // "source_train", ...
Split parse_split(const std::string& s);
Domain split_domain(Split s);

struct DatasetSpec {
  std::uint64_t data_seed = 2024;
  int height = 64;
  int width = 128;
  double d_max_full = 16.0;
  int n_source_train = 200;
  int n_source_val = 20;
  int n_target_train = 200;
  int n_target_test = 20;
  bool half_pixel = true;  // false keeps every disparity an integer
  int count(Split s) const;
};

// Scene parameters of sample `index` of `split`.
SceneSpec dataset_scene(const DatasetSpec& spec, Split split, int index);

struct ManifestRow {
  std::uint64_t seed = 0;
  Domain domain = Domain::Source;
  Split split = Split::SourceTrain;
  int index = 0;
  std::string left, right, disp_left, disp_right;  // relative to the dataset root
};

constexpr const char* kManifestName = "manifest.csv";

// Renders every split to `root` and writes the manifest. Returns the rows.
std::vector<ManifestRow> write_dataset(const DatasetSpec& spec, const std::filesystem::path& root);

std::vector<ManifestRow> read_manifest(const std::filesystem::path& root);
StereoSample load_sample(const std::filesystem::path& root, const ManifestRow& row);
// All samples of one split, in manifest order. Throws ConfigError when the
// dataset or the split is missing.
std::vector<StereoSample> load_split(const std::filesystem::path& root, Split split);

}  // namespace sca
