#pragma once

// The three training stages, evaluation and translation export. Each command
// reads a RunConfig, writes its artifacts under config.out_dir and returns a
// summary for callers that drive several commands in-process.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sca/config.hpp"
#include "sca/matcher.hpp"
#include "sca/translator.hpp"

namespace sca {

namespace artifacts {
constexpr const char* kMatcher = "matcher.ckpt";
constexpr const char* kTranslator = "translator.ckpt";
constexpr const char* kAdapted = "matcher_adapted.ckpt";
constexpr const char* kPretrainLog = "pretrain_log.csv";
constexpr const char* kPretrainVal = "pretrain_val.csv";
constexpr const char* kTranslatorLog = "translator_log.csv";
constexpr const char* kTranslatorEval = "translator_eval.csv";
constexpr const char* kAdaptLog = "adapt_log.csv";
constexpr const char* kConsistency = "consistency.csv";
}  // namespace artifacts

MatcherConfig matcher_config(const RunConfig& c);
TranslatorConfig translator_config(const RunConfig& c);

// Builds a model with its config-derived initialisation. Load a checkpoint
// on top to restore a trained state.
Matcher make_matcher(const RunConfig& c);
Translator make_translator(const RunConfig& c);
Discriminator make_discriminator(const RunConfig& c);

// Translator state in checkpoints additionally records whether SCA was on.
ParamList translator_checkpoint_entries(const Translator& g, const Discriminator& d);
void load_translator(const std::filesystem::path& path, Translator& g, Discriminator* d = nullptr);

std::size_t cmd_gen_data(const RunConfig& c);

struct PretrainSummary {
  std::vector<std::pair<int, double>> l1;   // (iteration, batch L1)
  std::vector<std::pair<int, double>> val;  // (iteration, source-val EPE)
};
PretrainSummary cmd_pretrain(const RunConfig& c);

struct TranslatorSummary {
  double consistency_initial = 0.0;  // mean image-level consistency, held-out
  double consistency_final = 0.0;
};
TranslatorSummary cmd_train_translator(const RunConfig& c);

struct AdaptSummary {
  std::vector<std::pair<int, double>> loss;
};
AdaptSummary cmd_adapt(const RunConfig& c, const std::filesystem::path& translator_ckpt,
                       const std::filesystem::path& matcher_ckpt);

struct EvalRow {
  std::string sample;
  double epe = 0.0;
  double d1 = 0.0;
};
struct EvalSummary {
  std::vector<EvalRow> rows;
  double mean_epe = 0.0;
  double mean_d1 = 0.0;
};
using DisparityPredictor = std::function<Tensor(const StereoSample&)>;
EvalSummary evaluate_samples(const std::vector<StereoSample>& samples, const DisparityPredictor& predict);
std::string format_eval_csv(const EvalSummary& s);
// Writes eval_<split>.csv under out_dir (or `csv_name` when given).
EvalSummary cmd_evaluate(const RunConfig& c, const std::filesystem::path& matcher_ckpt, Split split,
                         const std::string& csv_name = "");

struct TranslateRow {
  int index = 0;
  double consistency = 0.0;
};
// Translates source_val samples `ids` with target_test styles; writes
// translated/<id>_{left,right}.ppm and consistency.csv.
std::vector<TranslateRow> cmd_translate(const RunConfig& c, const std::filesystem::path& translator_ckpt,
                                        const std::vector<int>& ids);

// Held-out consistency score shared by training and translate: deterministic
// latents and style pairing per sample index.
struct HeldOutTranslation {
  TranslationOutput output;
  double consistency = 0.0;
};
HeldOutTranslation translate_held_out(const RunConfig& c, const Translator& g, const StereoSample& source,
                                      const StereoSample& style, int index);

std::string csv_number(double v);

}  // namespace sca
