#include "sca/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sca/checkpoint.hpp"
#include "sca/errors.hpp"
#include "sca/image_io.hpp"
#include "sca/losses.hpp"
#include "sca/ops.hpp"
#include "sca/optim.hpp"

namespace sca {

namespace fs = std::filesystem;

namespace {

// mix_seed stream ids.
enum Stream : std::uint64_t {
  kInitMatcher = 11,
  kInitTranslator = 12,
  kInitDiscriminator = 13,
  kPretrainSampling = 21,
  kTranslatorSampling = 22,
  kAdaptSampling = 23,
  kHeldOutLatent = 31,
  kAdaptLatent = 32,
};

constexpr const char* kUseScaKey = "G.meta.use_sca";

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

std::vector<StereoSample> load(const RunConfig& c, Split s) {
  std::vector<StereoSample> out = load_split(c.data_dir, s);
  const Shape expect{c.data.height, c.data.width};
  if (out.front().disparity[0].values.shape() != expect) {
    throw ConfigError("dataset in " + c.data_dir.string() + " has size " +
                      shape_string(out.front().disparity[0].values.shape()) + ", config expects " +
                      shape_string(expect));
  }
  return out;
}

std::array<OcclusionMask, 2> masks_of(const StereoSample& s) {
  return {occlusion_mask(s.disparity[0], s.disparity[1]), occlusion_mask(s.disparity[1], s.disparity[0])};
}

// 95th-percentile depth of the left views.
double depth_scale(const std::vector<StereoSample>& samples) {
  std::vector<double> z;
  for (const auto& s : samples) {
    const double fb = s.rig.f_u * s.rig.baseline_b;
    const auto d = s.disparity[0].values.data();
    const auto m = s.disparity[0].valid_mask.data();
    for (std::size_t k = 0; k < d.size(); ++k)
      if (m[k] > 0.0 && d[k] > 0.0) z.push_back(fb / d[k]);
  }
  if (z.empty()) throw ConfigError("no valid disparities in the training set");
  const std::size_t k = static_cast<std::size_t>(0.95 * static_cast<double>(z.size() - 1));
  std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(k), z.end());
  return z[k];
}

Tensor masked_l1(const Tensor& pred, const DisparityMap& gt) {
  double count = 0.0;
  for (double m : gt.valid_mask.data()) count += m;
  if (count == 0.0) throw UndefinedMetric("L1: no valid pixels");
  return scale(sum(mul(abs(sub(pred, gt.values)), gt.valid_mask)), 1.0 / count);
}

Tensor latent(const Translator& g, std::uint64_t stream_seed, int index, int view) {
  Rng rng(mix_seed(stream_seed, static_cast<std::uint64_t>(index) * 2 + static_cast<std::uint64_t>(view)));
  return g.sample_latent(rng);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::string header) { out_ << header << '\n'; }
  template <typename... T>
  void row(const T&... cells) {
    std::size_t k = 0;
    ((out_ << (k++ ? "," : "") << cell(cells)), ...);
    out_ << '\n';
  }
  void save(const fs::path& p) const { write_file(p, out_.str()); }

 private:
  static std::string cell(double v) { return csv_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  std::ostringstream out_;
};

}  // namespace

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

MatcherConfig matcher_config(const RunConfig& c) {
  MatcherConfig m;
  m.d_max_full = static_cast<int>(c.data.d_max_full);
  return m;
}

TranslatorConfig translator_config(const RunConfig& c) {
  TranslatorConfig t;
  t.d_max_full = static_cast<int>(c.data.d_max_full);
  t.use_sca = c.use_sca;
  return t;
}

Matcher make_matcher(const RunConfig& c) {
  Rng rng(mix_seed(c.seed, kInitMatcher));
  return Matcher(matcher_config(c), rng);
}

Translator make_translator(const RunConfig& c) {
  Rng rng(mix_seed(c.seed, kInitTranslator));
  return Translator(translator_config(c), rng);
}

Discriminator make_discriminator(const RunConfig& c) {
  Rng rng(mix_seed(c.seed, kInitDiscriminator));
  return Discriminator(DiscriminatorConfig{}, rng);
}

ParamList translator_checkpoint_entries(const Translator& g, const Discriminator& d) {
  ParamList out = g.state();
  ParamList c = d.state();
  out.insert(out.end(), c.begin(), c.end());
  out.push_back({kUseScaKey, Tensor(Shape{1}, g.config().use_sca ? 1.0 : 0.0)});
  return out;
}

void load_translator(const fs::path& path, Translator& g, Discriminator* d) {
  const ParamList stored = read_checkpoint(path);
  auto it = std::find_if(stored.begin(), stored.end(), [](const NamedTensor& t) { return t.name == kUseScaKey; });
  if (it == stored.end()) throw ConfigError(path.string() + ": not a translator checkpoint");
  g.mutable_config().use_sca = it->tensor.at(0) != 0.0;
  load_into(stored, g.state(), path.string());
  if (d) {
    load_into(stored, d->state(), path.string());
    d->load_power_state();
  }
}

std::size_t cmd_gen_data(const RunConfig& c) {
  c.validate();
  return write_dataset(c.data, c.data_dir).size();
}

PretrainSummary cmd_pretrain(const RunConfig& c) {
  c.validate();
  const auto train = load(c, Split::SourceTrain);
  const auto val = load(c, Split::SourceVal);
  ensure_dir(c.out_dir);

  Matcher e = make_matcher(c);
  Adam opt(tensors_of(e.parameters()), c.pretrain.lr, c.pretrain.beta1, c.pretrain.beta2);
  Rng rng(mix_seed(c.seed, kPretrainSampling));
  const int n = static_cast<int>(train.size());
  const double inv_b = 1.0 / c.pretrain.batch_size;

  PretrainSummary summary;
  CsvWriter log("iteration,l1");
  CsvWriter val_log("iteration,source_val_epe");
  for (int it = 1; it <= c.pretrain.iterations; ++it) {
    opt.zero_grad();
    double l1 = 0.0;
    for (int b = 0; b < c.pretrain.batch_size; ++b) {
      const StereoSample& s = train[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
      // Half of the draws supervise the right view through the mirrored pair.
      const bool right = rng.uniform() < 0.5;
      const Tensor pred = right ? e.predict_right(s.images[0], s.images[1]) : e.predict(s.images[0], s.images[1]);
      const Tensor loss = masked_l1(pred, s.disparity[right ? 1 : 0]);
      l1 += loss.item() * inv_b;
      backward(scale(loss, inv_b));
    }
    opt.step();
    if (it % c.pretrain.log_interval == 0) {
      log.row(it, l1);
      summary.l1.emplace_back(it, l1);
    }
    if (it % c.pretrain_val_interval == 0 || it == c.pretrain.iterations) {
      NoGradGuard ng;
      double total = 0.0;
      for (const auto& s : val) total += epe(e.predict(s.images[0], s.images[1]), s.disparity[0]);
      const double m = total / static_cast<double>(val.size());
      val_log.row(it, m);
      summary.val.emplace_back(it, m);
    }
  }
  save_checkpoint(e.parameters(), c.out_dir / artifacts::kMatcher);
  log.save(c.out_dir / artifacts::kPretrainLog);
  val_log.save(c.out_dir / artifacts::kPretrainVal);
  return summary;
}

HeldOutTranslation translate_held_out(const RunConfig& c, const Translator& g, const StereoSample& source,
                                      const StereoSample& style, int index) {
  NoGradGuard ng;
  const std::uint64_t stream = mix_seed(c.seed, kHeldOutLatent);
  TranslationInput in{source.images, source.disparity, style.images,
                      {latent(g, stream, index, 0), latent(g, stream, index, 1)}};
  HeldOutTranslation out;
  out.output = g.translate(in, source.rig);
  out.consistency = image_consistency(out.output.images, source.disparity, masks_of(source)).item();
  return out;
}

namespace {

double mean_held_out_consistency(const RunConfig& c, const Translator& g, const std::vector<StereoSample>& val,
                                 const std::vector<StereoSample>& styles) {
  double total = 0.0;
  for (std::size_t k = 0; k < val.size(); ++k) {
    total += translate_held_out(c, g, val[k], styles[k % styles.size()], static_cast<int>(k)).consistency;
  }
  return total / static_cast<double>(val.size());
}

}  // namespace

TranslatorSummary cmd_train_translator(const RunConfig& c) {
  c.validate();
  const auto source = load(c, Split::SourceTrain);
  const auto target = load(c, Split::TargetTrain);
  const auto val = load(c, Split::SourceVal);
  const auto styles = load(c, Split::TargetTest);
  ensure_dir(c.out_dir);

  Translator g = make_translator(c);
  g.set_cloud_scale(depth_scale(source));
  Discriminator d = make_discriminator(c);
  const PerceptualNet perc_net;
  const FeatureExtractor perc = perc_net.extractor();

  std::vector<std::array<OcclusionMask, 2>> masks;
  for (const auto& s : source) masks.push_back(masks_of(s));

  const StageConfig& st = c.translator;
  Adam opt_g(tensors_of(g.parameters()), st.lr, st.beta1, st.beta2);
  Adam opt_c(tensors_of(d.parameters()), c.translator_lr_c, st.beta1, st.beta2);
  Rng rng(mix_seed(c.seed, kTranslatorSampling));
  const double inv_b = 1.0 / st.batch_size;
  const int ns = static_cast<int>(source.size()), nt = static_cast<int>(target.size());

  TranslatorSummary summary;
  summary.consistency_initial = mean_held_out_consistency(c, g, val, styles);

  CsvWriter log("iteration,adv_g,adv_c,perc,feat,stereo");
  for (int it = 1; it <= st.iterations; ++it) {
    struct Drawn {
      int s, t;
      std::array<Tensor, 2> fake;
    };
    std::vector<Drawn> batch;
    double adv_g = 0, adv_c = 0, perc_v = 0, feat_v = 0, stereo_v = 0;

    opt_g.zero_grad();
    for (int b = 0; b < st.batch_size; ++b) {
      const int ks = rng.uniform_int(0, ns - 1), kt = rng.uniform_int(0, nt - 1);
      const StereoSample& src = source[static_cast<std::size_t>(ks)];
      const StereoSample& tgt = target[static_cast<std::size_t>(kt)];
      const std::array<Tensor, 2> z{g.sample_latent(rng), g.sample_latent(rng)};
      const TranslationOutput out = g.translate({src.images, src.disparity, tgt.images, z}, src.rig);

      d.prepare(false);
      ViewLogits fake_logits;
      LossComponents lc;
      for (int v = 0; v < 2; ++v) {
        const DiscriminatorOutput fake = d(out.images[v]);
        DiscriminatorOutput real;
        {
          NoGradGuard ng;
          real = d(tgt.images[v]);
        }
        fake_logits[v] = fake.logits;
        const Tensor p = perceptual_loss(out.images[v], src.images[v], perc);
        const Tensor f = feature_matching_loss(fake.hidden, real.hidden);
        lc.perc = lc.perc.defined() ? add(lc.perc, p) : p;
        lc.feat = lc.feat.defined() ? add(lc.feat, f) : f;
      }
      lc.adv_g = adv_loss_generator(fake_logits);
      lc.stereo = stereo_consistency_loss(out.features, out.images, src.disparity, masks[static_cast<std::size_t>(ks)]);
      const Objective obj = full_objective(lc, c.weights);
      backward(scale(obj.loss_g, inv_b));

      adv_g += lc.adv_g.item() * inv_b;
      perc_v += lc.perc.item() * inv_b;
      feat_v += lc.feat.item() * inv_b;
      stereo_v += lc.stereo.item() * inv_b;
      batch.push_back({ks, kt, {out.images[0].detach(), out.images[1].detach()}});
    }
    opt_g.step();

    opt_c.zero_grad();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      d.prepare(b == 0);
      const StereoSample& src = source[static_cast<std::size_t>(batch[b].s)];
      const StereoSample& tgt = target[static_cast<std::size_t>(batch[b].t)];
      ViewLogits fake, real_s, real_t;
      for (int v = 0; v < 2; ++v) {
        fake[v] = d(batch[b].fake[v]).logits;
        real_s[v] = d(src.images[v]).logits;
        real_t[v] = d(tgt.images[v]).logits;
      }
      LossComponents lc;
      lc.adv_c = adv_loss_discriminator(fake, real_s, real_t);
      const Objective obj = full_objective(lc, c.weights);
      backward(scale(obj.loss_c, inv_b));
      adv_c += lc.adv_c.item() * inv_b;
    }
    opt_c.step();
    d.prepare(false);

    if (it % st.log_interval == 0) log.row(it, adv_g, adv_c, perc_v, feat_v, stereo_v);
  }

  summary.consistency_final = mean_held_out_consistency(c, g, val, styles);
  save_checkpoint(translator_checkpoint_entries(g, d), c.out_dir / artifacts::kTranslator);
  log.save(c.out_dir / artifacts::kTranslatorLog);
  CsvWriter eval("stage,held_out_consistency");
  eval.row(std::string("initial"), summary.consistency_initial);
  eval.row(std::string("final"), summary.consistency_final);
  eval.save(c.out_dir / artifacts::kTranslatorEval);
  return summary;
}

AdaptSummary cmd_adapt(const RunConfig& c, const fs::path& translator_ckpt, const fs::path& matcher_ckpt) {
  c.validate();
  Matcher e = make_matcher(c);
  load_checkpoint(matcher_ckpt, e.parameters());
  Translator g = make_translator(c);
  load_translator(translator_ckpt, g);

  const auto source = load(c, Split::SourceTrain);
  const auto target = load(c, Split::TargetTrain);
  ensure_dir(c.out_dir);

  const LossWeights& w = c.weights;
  // G is frozen in this stage, so each source scene is translated once with
  // a fixed latent pair and a fixed style partner.
  std::vector<std::array<Tensor, 2>> translated(source.size());
  if (w.disp != 0.0) {
    NoGradGuard ng;
    const std::uint64_t stream = mix_seed(c.seed, kAdaptLatent);
    for (std::size_t k = 0; k < source.size(); ++k) {
      const int idx = static_cast<int>(k);
      const StereoSample& style = target[k % target.size()];
      TranslationInput in{source[k].images, source[k].disparity, style.images,
                          {latent(g, stream, idx, 0), latent(g, stream, idx, 1)}};
      translated[k] = g.translate(in, source[k].rig).images;
    }
  }

  const StageConfig& st = c.adapt;
  Adam opt(tensors_of(e.parameters()), st.lr, st.beta1, st.beta2);
  Rng rng(mix_seed(c.seed, kAdaptSampling));
  const double inv_b = 1.0 / st.batch_size;
  const int ns = static_cast<int>(source.size()), nt = static_cast<int>(target.size());

  AdaptSummary summary;
  CsvWriter log("iteration,loss_e,disp,reproj");
  for (int it = 1; it <= st.iterations; ++it) {
    opt.zero_grad();
    double le = 0, ld = 0, lr = 0;
    for (int b = 0; b < st.batch_size; ++b) {
      const int ks = rng.uniform_int(0, ns - 1), kt = rng.uniform_int(0, nt - 1);
      LossComponents lc;
      if (w.disp != 0.0) {
        const auto& ig = translated[static_cast<std::size_t>(ks)];
        lc.disp = disparity_loss({e.predict(ig[0], ig[1]), e.predict_right(ig[0], ig[1])},
                                 source[static_cast<std::size_t>(ks)].disparity);
        ld += lc.disp.item() * inv_b;
      }
      if (w.reproj != 0.0) {
        const auto& it_img = target[static_cast<std::size_t>(kt)].images;
        lc.reproj = reprojection_loss(it_img, {e.predict(it_img[0], it_img[1]), e.predict_right(it_img[0], it_img[1])},
                                      w.alpha);
        lr += lc.reproj.item() * inv_b;
      }
      const Objective obj = full_objective(lc, w);
      le += obj.loss_e.item() * inv_b;
      backward(scale(obj.loss_e, inv_b));
    }
    opt.step();
    if (it % st.log_interval == 0) {
      log.row(it, le, ld, lr);
      summary.loss.emplace_back(it, le);
    }
  }
  save_checkpoint(e.parameters(), c.out_dir / artifacts::kAdapted);
  log.save(c.out_dir / artifacts::kAdaptLog);
  return summary;
}

EvalSummary evaluate_samples(const std::vector<StereoSample>& samples, const DisparityPredictor& predict) {
  if (samples.empty()) throw ConfigError("evaluate: empty split");
  EvalSummary s;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Tensor pred = predict(samples[k]);
    char name[16];
    std::snprintf(name, sizeof name, "%05zu", k);
    s.rows.push_back({name, epe(pred, samples[k].disparity[0]), d1_all(pred, samples[k].disparity[0])});
  }
  for (const auto& r : s.rows) {
    s.mean_epe += r.epe;
    s.mean_d1 += r.d1;
  }
  s.mean_epe /= static_cast<double>(s.rows.size());
  s.mean_d1 /= static_cast<double>(s.rows.size());
  return s;
}

std::string format_eval_csv(const EvalSummary& s) {
  std::string out = "sample,epe,d1_all\n";
  for (const auto& r : s.rows) out += r.sample + "," + csv_number(r.epe) + "," + csv_number(r.d1) + "\n";
  out += "mean," + csv_number(s.mean_epe) + "," + csv_number(s.mean_d1) + "\n";
  return out;
}

EvalSummary cmd_evaluate(const RunConfig& c, const fs::path& matcher_ckpt, Split split, const std::string& csv_name) {
  c.validate();
  Matcher e = make_matcher(c);
  load_checkpoint(matcher_ckpt, e.parameters());
  auto samples = load(c, split);
  if (c.eval_samples > 0 && static_cast<std::size_t>(c.eval_samples) < samples.size()) {
    samples.resize(static_cast<std::size_t>(c.eval_samples));
  }
  const EvalSummary s = evaluate_samples(samples, [&](const StereoSample& x) {
    NoGradGuard ng;
    return e.predict(x.images[0], x.images[1]);
  });
  ensure_dir(c.out_dir);
  write_file(c.out_dir / (csv_name.empty() ? "eval_" + std::string(split_name(split)) + ".csv" : csv_name),
             format_eval_csv(s));
  return s;
}

std::vector<TranslateRow> cmd_translate(const RunConfig& c, const fs::path& translator_ckpt,
                                        const std::vector<int>& ids) {
  c.validate();
  Translator g = make_translator(c);
  load_translator(translator_ckpt, g);
  const auto val = load(c, Split::SourceVal);
  const auto styles = load(c, Split::TargetTest);
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(val.size())) {
      throw ConfigError("unknown sample id " + std::to_string(id) + " (source_val has " +
                        std::to_string(val.size()) + " samples)");
    }
  }
  const fs::path dir = c.out_dir / "translated";
  ensure_dir(dir);
  std::vector<TranslateRow> rows;
  CsvWriter csv("sample,consistency");
  for (int id : ids) {
    const auto t = translate_held_out(c, g, val[static_cast<std::size_t>(id)],
                                      styles[static_cast<std::size_t>(id) % styles.size()], id);
    char stem[16];
    std::snprintf(stem, sizeof stem, "%05d", id);
    write_ppm(t.output.images[0], dir / (std::string(stem) + "_left.ppm"));
    write_ppm(t.output.images[1], dir / (std::string(stem) + "_right.ppm"));
    csv.row(id, t.consistency);
    rows.push_back({id, t.consistency});
  }
  csv.save(c.out_dir / artifacts::kConsistency);
  return rows;
}

}  // namespace sca
