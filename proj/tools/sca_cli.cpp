// Command-line entry point: data generation, the three training stages,
// evaluation, translation export and the gradient-check battery.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "sca/config.hpp"
#include "sca/errors.hpp"
#include "sca/gradcheck.hpp"
#include "sca/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool no_sca = false;
  std::string out;
};

sca::RunConfig resolve(const CommonFlags& f) {
  sca::RunConfig c = f.config.empty() ? sca::RunConfig{} : sca::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.no_sca) c.use_sca = false;
  if (!f.out.empty()) c.out_dir = f.out;
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_flag("--no-sca", f.no_sca, "disable the SCA blocks (ablation)");
  cmd->add_option("--out", f.out, "output directory (overrides out_dir)");
}

std::filesystem::path or_default(const std::string& flag, const std::filesystem::path& fallback) {
  return flag.empty() ? fallback : std::filesystem::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCA stereo domain adaptation pipeline"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string matcher, translator, split = "target_test", ids_text;
  std::uint64_t gradcheck_seed = 0;

  auto* gen = app.add_subcommand("gen-data", "render the synthetic two-domain dataset");
  auto* pre = app.add_subcommand("pretrain", "stage 1: supervised matcher training on the source domain");
  auto* trn = app.add_subcommand("train-translator", "stage 2: translator and discriminator");
  auto* ada = app.add_subcommand("adapt", "stage 3: matcher training on translated and target pairs");
  auto* evl = app.add_subcommand("evaluate", "EPE / D1-all of a matcher checkpoint on one split");
  auto* tra = app.add_subcommand("translate", "export translated source_val pairs with consistency scores");
  auto* grd = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  for (auto* cmd : {gen, pre, trn, ada, evl, tra}) add_common(cmd, flags);
  for (auto* cmd : {ada, evl}) cmd->add_option("--matcher", matcher, "matcher checkpoint");
  for (auto* cmd : {ada, tra}) cmd->add_option("--translator", translator, "translator checkpoint");
  evl->add_option("--split", split, "source_train | source_val | target_train | target_test");
  tra->add_option("--samples", ids_text, "comma-separated source_val indices (default: all)");
  grd->add_option("--seed", gradcheck_seed, "seed of the random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*grd) {
      const sca::GradcheckReport r = sca::run_gradcheck(gradcheck_seed);
      std::cout << r.format();
      return r.all_passed() ? 0 : 1;
    }
    const sca::RunConfig c = resolve(flags);
    namespace a = sca::artifacts;
    if (*gen) {
      std::cout << "wrote " << sca::cmd_gen_data(c) << " samples to " << c.data_dir.string() << "\n";
    } else if (*pre) {
      const auto s = sca::cmd_pretrain(c);
      if (!s.val.empty()) std::cout << "source_val EPE " << s.val.back().second << "\n";
    } else if (*trn) {
      const auto s = sca::cmd_train_translator(c);
      std::cout << "held-out consistency " << s.consistency_initial << " -> " << s.consistency_final << "\n";
    } else if (*ada) {
      sca::cmd_adapt(c, or_default(translator, c.out_dir / a::kTranslator), or_default(matcher, c.out_dir / a::kMatcher));
      std::cout << "wrote " << (c.out_dir / a::kAdapted).string() << "\n";
    } else if (*evl) {
      const auto s = sca::cmd_evaluate(c, or_default(matcher, c.out_dir / a::kMatcher), sca::parse_split(split));
      std::cout << split << ": EPE " << s.mean_epe << " px, D1-all " << s.mean_d1 << " %\n";
    } else if (*tra) {
      std::vector<int> ids;
      if (ids_text.empty()) {
        for (int k = 0; k < c.data.n_source_val; ++k) ids.push_back(k);
      } else {
        for (const auto& t : CLI::detail::split(ids_text, ',')) ids.push_back(std::stoi(t));
      }
      const auto rows = sca::cmd_translate(c, or_default(translator, c.out_dir / a::kTranslator), ids);
      double m = 0.0;
      for (const auto& r : rows) m += r.consistency;
      std::cout << "mean consistency " << (rows.empty() ? 0.0 : m / rows.size()) << "\n";
    }
  } catch (const sca::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
