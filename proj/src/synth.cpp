#include "sca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sca/errors.hpp"
#include "sca/rng.hpp"

namespace sca {

const char* domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }

Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::Source;
  if (s == "target") return Domain::Target;
  throw InvalidArgument("unknown domain '" + s + "'");
}

void SceneSpec::validate() const {
  if (num_layers < 1) throw InvalidArgument("SceneSpec: num_layers must be >= 1");
  if (!(d_min > 0.0 && d_min <= d_max_scene && d_max_scene < d_max_full)) {
    throw InvalidArgument("SceneSpec: need 0 < d_min <= d_max_scene < d_max_full");
  }
  if (height < 4 || width < 4) throw InvalidArgument("SceneSpec: image too small");
  const double step = half_pixel ? 0.5 : 1.0;
  const double span = std::floor((d_max_scene - d_min) / step) * step;
  if (span < 2.0 * (num_layers - 1)) {
    throw InvalidArgument("SceneSpec: disparity range too narrow for " + std::to_string(num_layers) +
                          " layers 2 px apart");
  }
}

bool SceneLayer::covers(double x, double y) const {
  if (full_frame) return true;
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  if (ellipse) return dx * dx + dy * dy <= 1.0;
  return std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0;
}

CameraRig default_rig(int height, int width) {
  CameraRig rig;
  rig.c_u = width / 2.0;
  rig.c_v = height / 2.0;
  return rig;
}

namespace {

// Stream ids for mix_seed.
constexpr std::uint64_t kGeometryStream = 1;
constexpr std::uint64_t kTextureStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

std::vector<SceneLayer> make_layers(const SceneSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, kGeometryStream));
  const double step = spec.half_pixel ? 0.5 : 1.0;
  const int lo = static_cast<int>(std::ceil(spec.d_min / step - 1e-9));
  const int hi = static_cast<int>(std::floor(spec.d_max_scene / step + 1e-9));
  const int gap = static_cast<int>(std::lround(2.0 / step));

  // Sorted grid indices spaced >= gap: draw slack and distribute it.
  const int n = spec.num_layers;
  const int slack = (hi - lo) - gap * (n - 1);
  std::vector<int> cuts(static_cast<std::size_t>(n));
  for (auto& c : cuts) c = rng.uniform_int(0, slack);
  std::sort(cuts.begin(), cuts.end());

  std::vector<SceneLayer> layers(static_cast<std::size_t>(n));
  const double w = spec.width, h = spec.height;
  for (int k = 0; k < n; ++k) {
    SceneLayer& l = layers[static_cast<std::size_t>(k)];
    l.disparity = (lo + cuts[static_cast<std::size_t>(k)] + gap * k) * step;
    if (k == 0) {
      l.full_frame = true;
      continue;
    }
    l.ellipse = rng.uniform() < 0.5;
    l.cx = rng.uniform(0.1 * w, 0.9 * w);
    l.cy = rng.uniform(0.1 * h, 0.9 * h);
    l.rx = rng.uniform(0.08 * w, 0.25 * w);
    l.ry = rng.uniform(0.15 * h, 0.4 * h);
  }
  return layers;
}

// Column-knot texture of one layer: value(c, y, x) is linear between the
// knots at x = m - 0.5 (m integer).
struct Texture {
  int height = 0, knots = 0, origin = 0;  // knot m sits at x = m - origin - 0.5
  std::vector<double> values;             // [3][height][knots]

  double at(int c, int y, double x) const {
    const double u = x + 0.5 + origin;
    int m = static_cast<int>(std::floor(u));
    m = std::clamp(m, 0, knots - 2);
    const double t = u - m;
    const double* row = &values[(static_cast<std::size_t>(c) * height + y) * knots];
    return (1.0 - t) * row[m] + t * row[m + 1];
  }
};

Texture make_texture(Rng& rng, int height, int width, double margin) {
  Texture t;
  t.height = height;
  t.origin = static_cast<int>(std::ceil(margin)) + 2;
  t.knots = width + 2 * t.origin + 2;
  t.values.resize(static_cast<std::size_t>(3) * height * t.knots);

  double base[3];
  for (double& b : base) b = rng.uniform(0.2, 0.8);
  const double freq = rng.uniform(0.15, 0.6);
  const double tilt = rng.uniform(-0.5, 0.5);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amp = rng.uniform(0.08, 0.2);
  const int block = rng.uniform_int(1, 3);  // vertical extent of noise cells
  std::vector<double> noise(static_cast<std::size_t>(height / block + 1) * t.knots);
  for (double& v : noise) v = rng.uniform(-0.18, 0.18);

  for (int c = 0; c < 3; ++c) {
    const double shift = 0.7 * c;
    for (int y = 0; y < height; ++y) {
      for (int m = 0; m < t.knots; ++m) {
        const double x = m - t.origin - 0.5;
        double v = base[c] + amp * std::sin(freq * x + tilt * y + phase + shift) +
                   noise[static_cast<std::size_t>(y / block) * t.knots + m];
        t.values[(static_cast<std::size_t>(c) * height + y) * t.knots + m] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return t;
}

}  // namespace

SceneLayout scene_layout(const SceneSpec& spec) {
  SceneLayout out;
  out.layers = make_layers(spec);
  const int h = spec.height, w = spec.width;
  for (int v = 0; v < 2; ++v) {
    out.visible[v].resize(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
      for (int i = 0; i < w; ++i) {
        // A right-view pixel at column i shows layer-space column i + d; the
        // layer's own disparity decides which layer-space column it is.
        int pick = 0;
        for (int k = static_cast<int>(out.layers.size()) - 1; k >= 0; --k) {
          const SceneLayer& l = out.layers[static_cast<std::size_t>(k)];
          const double x = v == 0 ? i : i + l.disparity;
          if (l.covers(x, y)) {
            pick = k;
            break;
          }
        }
        out.visible[v][static_cast<std::size_t>(y) * w + i] = pick;
      }
    }
  }
  return out;
}

Tensor apply_target_style(const Tensor& image, std::uint64_t noise_seed) {
  static constexpr double kGain[3] = {0.9, 1.0, 1.15};
  if (image.rank() != 3 || image.dim(0) != 3) throw InvalidArgument("apply_target_style: expected [3,H,W]");
  Rng rng(noise_seed);
  Tensor out = image.detach();
  auto d = out.mutable_data();
  const std::size_t plane = d.size() / 3;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double v = kGain[k / plane] * std::pow(d[k], 1.4) + rng.normal(0.0, 0.02);
    d[k] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

StereoSample generate_scene(const SceneSpec& spec) {
  const SceneLayout layout = scene_layout(spec);
  const int h = spec.height, w = spec.width;
  Rng rng(mix_seed(spec.seed, kTextureStream));
  std::vector<Texture> textures;
  for (std::size_t k = 0; k < layout.layers.size(); ++k) {
    textures.push_back(make_texture(rng, h, w, spec.d_max_full));
  }

  StereoSample s;
  s.rig = default_rig(h, w);
  for (int v = 0; v < 2; ++v) {
    std::vector<double> img(static_cast<std::size_t>(3) * h * w), disp(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
      for (int i = 0; i < w; ++i) {
        const std::size_t p = static_cast<std::size_t>(y) * w + i;
        const int k = layout.visible[v][p];
        const double d = layout.layers[static_cast<std::size_t>(k)].disparity;
        const double x = v == 0 ? i : i + d;
        for (int c = 0; c < 3; ++c) {
          img[static_cast<std::size_t>(c) * h * w + p] = textures[static_cast<std::size_t>(k)].at(c, y, x);
        }
        disp[p] = d;
      }
    }
    s.images[v] = Tensor(Shape{3, h, w}, std::move(img));
    s.disparity[v] = DisparityMap::dense(Tensor(Shape{h, w}, std::move(disp)), static_cast<View>(v));
  }
  if (spec.domain == Domain::Target) {
    for (int v = 0; v < 2; ++v) {
      s.images[v] = apply_target_style(s.images[v], mix_seed(spec.seed, kNoiseStream + v));
    }
  }
  return s;
}

}  // namespace sca
