#include <doctest.h>

#include <filesystem>

#include "sca/checkpoint.hpp"
#include "sca/config.hpp"
#include "sca/errors.hpp"
#include "sca/harness.hpp"
#include "sca/image_io.hpp"
#include "sca/rng.hpp"

using namespace sca;
namespace fs = std::filesystem;

TEST_CASE("config defaults follow the training recipe") {
  const RunConfig c;
  CHECK(c.pretrain.lr == 1e-4);
  CHECK(c.translator.lr == 1e-4);
  CHECK(c.translator_lr_c == 4e-4);
  CHECK(c.translator.beta1 == 0.0);
  CHECK(c.translator.beta2 == 0.9);
  CHECK(c.adapt.beta1 == 0.9);
  CHECK(c.adapt.beta2 == 0.999);
  CHECK(c.weights.stereo == 10.0);
  CHECK(c.weights.disp == doctest::Approx(0.1));
  CHECK(c.weights.alpha == doctest::Approx(0.85));
  CHECK(c.data.height == 64);
  CHECK(c.data.width == 128);
  CHECK(c.data.d_max_full == 16);
}

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(
      "# comment\nseed = 7\npretrain.iterations=12\ntranslator.use_sca = false\nloss.alpha = 0.5 # tail\n"
      "data.width = 64\n");
  CHECK(c.seed == 7);
  CHECK(c.pretrain.iterations == 12);
  CHECK_FALSE(c.use_sca);
  CHECK(c.weights.alpha == 0.5);
  CHECK(c.data.width == 64);
  CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed 7\n"), ConfigError);
  // round trip through the formatter
  const RunConfig back = parse_config(format_config(c));
  CHECK(config_entries(back) == config_entries(c));
}

TEST_CASE("config validation") {
  RunConfig c;
  c.pretrain.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.data.width = 100;  // not divisible by 8
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip and errors") {
  Rng rng(1);
  ParamList p{{"a", rng.normal_tensor({2, 3})}, {"b", rng.normal_tensor({4})}};
  const std::string bytes = encode_checkpoint(p);
  CHECK(bytes.rfind("sca-checkpoint 1\n", 0) == 0);
  const ParamList back = decode_checkpoint(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "a");
  CHECK(back[0].tensor.values() == p[0].tensor.values());
  CHECK(encode_checkpoint(back) == bytes);

  ParamList into{{"a", Tensor({2, 3})}, {"b", Tensor({4})}};
  load_into(back, into);
  CHECK(into[1].tensor.values() == p[1].tensor.values());
  ParamList wrong{{"a", Tensor({3, 2})}};
  CHECK_THROWS_AS(load_into(back, wrong), ConfigError);
  ParamList missing{{"c", Tensor({1})}};
  CHECK_THROWS_AS(load_into(back, missing), ConfigError);
  CHECK_THROWS_AS(decode_checkpoint("not a checkpoint"), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
}

TEST_CASE("model checkpoints restore identical predictions") {
  RunConfig c;
  const fs::path dir = fs::temp_directory_path() / "sca_test_ckpt";
  fs::create_directories(dir);
  c.seed = 3;
  const Matcher e = make_matcher(c);
  save_checkpoint(e.parameters(), dir / "m.ckpt");
  c.seed = 4;
  Matcher other = make_matcher(c);
  load_checkpoint(dir / "m.ckpt", other.parameters());
  Rng rng(2);
  const Tensor l = rng.uniform_tensor({3, 16, 32}, 0, 1), r = rng.uniform_tensor({3, 16, 32}, 0, 1);
  CHECK(other.predict(l, r).values() == e.predict(l, r).values());

  Translator g = make_translator(c);
  Discriminator d = make_discriminator(c);
  g.mutable_config().use_sca = false;
  g.set_cloud_scale(3.5);
  save_checkpoint(translator_checkpoint_entries(g, d), dir / "t.ckpt");
  c.seed = 9;
  Translator g2 = make_translator(c);
  Discriminator d2 = make_discriminator(c);
  load_translator(dir / "t.ckpt", g2, &d2);
  CHECK_FALSE(g2.config().use_sca);
  CHECK(g2.cloud_scale() == 3.5);
  CHECK(encode_checkpoint(translator_checkpoint_entries(g2, d2)) ==
        encode_checkpoint(translator_checkpoint_entries(g, d)));
}

TEST_CASE("eval csv layout") {
  EvalSummary s;
  s.rows = {{"00000", 1.5, 10.0}, {"00001", 0.5, 0.0}};
  s.mean_epe = 1.0;
  s.mean_d1 = 5.0;
  CHECK(format_eval_csv(s) == "sample,epe,d1_all\n00000,1.5,10\n00001,0.5,0\nmean,1,5\n");
  CHECK(csv_number(0.1) == "0.10000000000000001");
}

TEST_CASE("tiny end-to-end pipeline") {
  const fs::path root = fs::temp_directory_path() / "sca_test_pipeline";
  fs::remove_all(root);
  RunConfig c;
  c.data_dir = root / "data";
  c.out_dir = root / "out";
  c.data.height = 16;
  c.data.width = 64;
  c.data.n_source_train = 2;
  c.data.n_source_val = 1;
  c.data.n_target_train = 2;
  c.data.n_target_test = 2;
  c.pretrain = {2, 1, 1e-3, 0.9, 0.999, 1};
  c.pretrain_val_interval = 1;
  c.translator = {2, 1, 1e-4, 0.0, 0.9, 1};
  c.adapt = {2, 1, 1e-4, 0.9, 0.999, 1};
  CHECK(cmd_gen_data(c) == 7);
  CHECK_FALSE(cmd_pretrain(c).val.empty());
  cmd_train_translator(c);
  cmd_adapt(c, c.out_dir / artifacts::kTranslator, c.out_dir / artifacts::kMatcher);
  const EvalSummary e = cmd_evaluate(c, c.out_dir / artifacts::kAdapted, Split::TargetTest);
  CHECK(e.rows.size() == 2);
  CHECK(fs::exists(c.out_dir / "eval_target_test.csv"));
  const auto rows = cmd_translate(c, c.out_dir / artifacts::kTranslator, {0});
  CHECK(rows.size() == 1);
  CHECK(fs::exists(c.out_dir / "translated" / "00000_left.ppm"));
  CHECK_THROWS_AS(cmd_translate(c, c.out_dir / artifacts::kTranslator, {5}), ConfigError);
  CHECK_THROWS_AS(cmd_adapt(c, root / "none.ckpt", c.out_dir / artifacts::kMatcher), ConfigError);
}
