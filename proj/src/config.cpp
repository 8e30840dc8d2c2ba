#include "sca/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <vector>

#include "sca/errors.hpp"
#include "sca/image_io.hpp"

namespace sca {

void RunConfig::validate() const {
  auto check_stage = [](const StageConfig& s, const char* name) {
    if (s.iterations < 0 || s.batch_size < 1 || !(s.lr > 0.0) || s.log_interval < 1) {
      throw ConfigError(std::string(name) + ": iterations >= 0, batch_size >= 1, lr > 0, log_interval >= 1");
    }
    if (s.beta1 < 0.0 || s.beta1 >= 1.0 || s.beta2 < 0.0 || s.beta2 >= 1.0) {
      throw ConfigError(std::string(name) + ": betas must lie in [0, 1)");
    }
  };
  check_stage(pretrain, "pretrain");
  check_stage(translator, "translator");
  check_stage(adapt, "adapt");
  if (!(translator_lr_c > 0.0)) throw ConfigError("translator.lr_c must be > 0");
  if (pretrain_val_interval < 1) throw ConfigError("pretrain.val_interval must be >= 1");
  if (data.height % 8 != 0 || data.width % 8 != 0 || data.height < 16 || data.width < 32) {
    throw ConfigError("image size must be a multiple of 8, at least 16x32");
  }
  if (!(data.d_max_full >= 4.0) || data.d_max_full >= data.width / 2.0) {
    throw ConfigError("d_max_full must lie in [4, width/2)");
  }
  for (int n : {data.n_source_train, data.n_source_val, data.n_target_train, data.n_target_test}) {
    if (n < 1) throw ConfigError("every split needs at least one sample");
  }
  if (eval_samples < 0) throw ConfigError("eval.samples must be >= 0");
  try {
    weights.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Binding {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Binding bind(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) c.*member = parse_bool(k, v);
            else if constexpr (std::is_same_v<T, std::filesystem::path>) c.*member = v;
            else c.*member = parse_number<T>(k, v);
          },
          [member](const RunConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*member) ? "true" : "false");
            else if constexpr (std::is_same_v<T, std::filesystem::path>) return (c.*member).string();
            else if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename S, typename T>
Binding bind(S RunConfig::*outer, T S::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool(k, v);
            else (c.*outer).*member = parse_number<T>(k, v);
          },
          [=](const RunConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string(((c.*outer).*member) ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return fmt((c.*outer).*member);
            else return std::to_string((c.*outer).*member);
          }};
}

const std::map<std::string, Binding>& bindings() {
  static const std::map<std::string, Binding> b = [] {
    std::map<std::string, Binding> m;
    m["data_dir"] = bind(&RunConfig::data_dir);
    m["out_dir"] = bind(&RunConfig::out_dir);
    m["seed"] = bind(&RunConfig::seed);
    m["data.seed"] = bind(&RunConfig::data, &DatasetSpec::data_seed);
    m["data.height"] = bind(&RunConfig::data, &DatasetSpec::height);
    m["data.width"] = bind(&RunConfig::data, &DatasetSpec::width);
    m["data.d_max_full"] = bind(&RunConfig::data, &DatasetSpec::d_max_full);
    m["data.n_source_train"] = bind(&RunConfig::data, &DatasetSpec::n_source_train);
    m["data.n_source_val"] = bind(&RunConfig::data, &DatasetSpec::n_source_val);
    m["data.n_target_train"] = bind(&RunConfig::data, &DatasetSpec::n_target_train);
    m["data.n_target_test"] = bind(&RunConfig::data, &DatasetSpec::n_target_test);
    m["data.half_pixel"] = bind(&RunConfig::data, &DatasetSpec::half_pixel);
    for (auto [prefix, stage] : {std::pair{"pretrain", &RunConfig::pretrain},
                                 std::pair{"translator", &RunConfig::translator},
                                 std::pair{"adapt", &RunConfig::adapt}}) {
      const std::string p = prefix;
      m[p + ".iterations"] = bind(stage, &StageConfig::iterations);
      m[p + ".batch_size"] = bind(stage, &StageConfig::batch_size);
      m[p + (p == "translator" ? ".lr_g" : ".lr")] = bind(stage, &StageConfig::lr);
      m[p + ".beta1"] = bind(stage, &StageConfig::beta1);
      m[p + ".beta2"] = bind(stage, &StageConfig::beta2);
      m[p + ".log_interval"] = bind(stage, &StageConfig::log_interval);
    }
    m["pretrain.val_interval"] = bind(&RunConfig::pretrain_val_interval);
    m["translator.lr_c"] = bind(&RunConfig::translator_lr_c);
    m["translator.use_sca"] = bind(&RunConfig::use_sca);
    m["loss.perc"] = bind(&RunConfig::weights, &LossWeights::perc);
    m["loss.feat"] = bind(&RunConfig::weights, &LossWeights::feat);
    m["loss.stereo"] = bind(&RunConfig::weights, &LossWeights::stereo);
    m["loss.disp"] = bind(&RunConfig::weights, &LossWeights::disp);
    m["loss.reproj"] = bind(&RunConfig::weights, &LossWeights::reproj);
    m["loss.alpha"] = bind(&RunConfig::weights, &LossWeights::alpha);
    m["eval.samples"] = bind(&RunConfig::eval_samples);
    return m;
  }();
  return b;
}

}  // namespace

RunConfig parse_config(const std::string& text, RunConfig c) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = bindings().find(key);
    if (it == bindings().end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second.set(c, key, value);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config(read_file(path));
}

std::map<std::string, std::string> config_entries(const RunConfig& c) {
  std::map<std::string, std::string> out;
  for (const auto& [k, b] : bindings()) out[k] = b.get(c);
  return out;
}

std::string format_config(const RunConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace sca
