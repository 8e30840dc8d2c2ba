#include "sca/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sca/errors.hpp"
#include "sca/image_io.hpp"
#include "sca/parallel.hpp"
#include "sca/rng.hpp"

namespace sca {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::SourceTrain: return "source_train";
    case Split::SourceVal: return "source_val";
    case Split::TargetTrain: return "target_train";
    case Split::TargetTest: return "target_test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  for (Split k : {Split::SourceTrain, Split::SourceVal, Split::TargetTrain, Split::TargetTest}) {
    if (s == split_name(k)) return k;
  }
  throw ConfigError("unknown split '" + s + "'");
}

Domain split_domain(Split s) {
  return s == Split::SourceTrain || s == Split::SourceVal ? Domain::Source : Domain::Target;
}

int DatasetSpec::count(Split s) const {
  switch (s) {
    case Split::SourceTrain: return n_source_train;
    case Split::SourceVal: return n_source_val;
    case Split::TargetTrain: return n_target_train;
    case Split::TargetTest: return n_target_test;
  }
  return 0;
}

SceneSpec dataset_scene(const DatasetSpec& spec, Split split, int index) {
  SceneSpec s;
  s.seed = mix_seed(spec.data_seed, (static_cast<std::uint64_t>(split) << 32) | static_cast<std::uint32_t>(index));
  Rng rng(s.seed);
  s.num_layers = rng.uniform_int(2, 4);
  s.domain = split_domain(split);
  s.height = spec.height;
  s.width = spec.width;
  s.d_max_full = spec.d_max_full;
  s.d_min = 2.0;
  s.d_max_scene = std::min(14.0, spec.d_max_full - 1.0);
  s.half_pixel = spec.half_pixel;
  return s;
}

std::vector<ManifestRow> write_dataset(const DatasetSpec& spec, const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  std::vector<ManifestRow> rows;
  for (Split split : {Split::SourceTrain, Split::SourceVal, Split::TargetTrain, Split::TargetTest}) {
    const fs::path dir = root / split_name(split);
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const int n = spec.count(split);
    std::vector<ManifestRow> block(static_cast<std::size_t>(n));
    parallel_for(n, [&](int k) {
      const SceneSpec scene = dataset_scene(spec, split, k);
      const StereoSample s = generate_scene(scene);
      char stem[32];
      std::snprintf(stem, sizeof stem, "%05d", k);
      ManifestRow& row = block[static_cast<std::size_t>(k)];
      row.seed = scene.seed;
      row.domain = scene.domain;
      row.split = split;
      row.index = k;
      const std::string base = std::string(split_name(split)) + "/" + stem;
      row.left = base + "_left.ppm";
      row.right = base + "_right.ppm";
      row.disp_left = base + "_disp_left.pfm";
      row.disp_right = base + "_disp_right.pfm";
      write_ppm(s.images[0], root / row.left);
      write_ppm(s.images[1], root / row.right);
      write_pfm(s.disparity[0].values, root / row.disp_left);
      write_pfm(s.disparity[1].values, root / row.disp_right);
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }

  std::ostringstream csv;
  csv << "seed,domain,split,index,left,right,disp_left,disp_right\n";
  for (const auto& r : rows) {
    csv << r.seed << ',' << domain_name(r.domain) << ',' << split_name(r.split) << ',' << r.index << ','
        << r.left << ',' << r.right << ',' << r.disp_left << ',' << r.disp_right << '\n';
  }
  write_file(root / kManifestName, csv.str());
  return rows;
}

std::vector<ManifestRow> read_manifest(const fs::path& root) {
  const fs::path path = root / kManifestName;
  if (!fs::exists(path)) throw ConfigError("no dataset manifest at " + path.string());
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<ManifestRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw ConfigError("manifest line " + std::to_string(line_no) + ": expected 8 fields");
    ManifestRow r;
    try {
      r.seed = std::stoull(f[0]);
      r.index = std::stoi(f[3]);
    } catch (const std::exception&) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": bad number");
    }
    r.domain = parse_domain(f[1]);
    r.split = parse_split(f[2]);
    r.left = f[4];
    r.right = f[5];
    r.disp_left = f[6];
    r.disp_right = f[7];
    rows.push_back(std::move(r));
  }
  return rows;
}

StereoSample load_sample(const fs::path& root, const ManifestRow& row) {
  StereoSample s;
  s.images[0] = read_ppm(root / row.left);
  s.images[1] = read_ppm(root / row.right);
  s.disparity[0] = DisparityMap::dense(read_pfm(root / row.disp_left), View::Left);
  s.disparity[1] = DisparityMap::dense(read_pfm(root / row.disp_right), View::Right);
  s.rig = default_rig(s.disparity[0].height(), s.disparity[0].width());
  return s;
}

std::vector<StereoSample> load_split(const fs::path& root, Split split) {
  std::vector<ManifestRow> rows = read_manifest(root);
  rows.erase(std::remove_if(rows.begin(), rows.end(), [&](const ManifestRow& r) { return r.split != split; }),
             rows.end());
  if (rows.empty()) throw ConfigError(std::string("split ") + split_name(split) + " is empty in " + root.string());
  std::vector<StereoSample> out(rows.size());
  parallel_for(static_cast<int>(rows.size()), [&](int k) { out[k] = load_sample(root, rows[k]); });
  return out;
}

}  // namespace sca
