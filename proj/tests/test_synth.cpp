#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "reference.hpp"
#include "sca/dataset.hpp"
#include "sca/errors.hpp"
#include "sca/image_io.hpp"
#include "sca/rng.hpp"
#include "sca/synth.hpp"

using namespace sca;
namespace fs = std::filesystem;

namespace {

SceneSpec small(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.height = 32;
  s.width = 64;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sca_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  const StereoSample a = generate_scene(small(11)), b = generate_scene(small(11));
  for (int v = 0; v < 2; ++v) {
    CHECK(a.images[v].values() == b.images[v].values());
    CHECK(a.disparity[v].values.values() == b.disparity[v].values.values());
  }
  CHECK(generate_scene(small(12)).images[0].values() != a.images[0].values());
}

TEST_CASE("domains differ only photometrically") {
  SceneSpec s = small(21);
  const StereoSample src = generate_scene(s);
  s.domain = Domain::Target;
  const StereoSample tgt = generate_scene(s);
  for (int v = 0; v < 2; ++v) {
    CHECK(src.disparity[v].values.values() == tgt.disparity[v].values.values());
    CHECK(src.images[v].values() != tgt.images[v].values());
    for (double x : tgt.images[v].data()) CHECK((x >= 0.0 && x <= 1.0));
  }
}

TEST_CASE("target style transform") {
  const Tensor img(Shape{3, 1, 1}, 0.5);
  const Tensor a = apply_target_style(img, 7), b = apply_target_style(img, 7);
  CHECK(a.values() == b.values());
  const double g = std::pow(0.5, 1.4);
  CHECK(std::fabs(a.at(0) - 0.9 * g) < 0.1);
  CHECK(std::fabs(a.at(2) - 1.15 * g) < 0.1);
  // noise averages out over a large image
  const Tensor big(Shape{3, 64, 64}, 0.5);
  const Tensor t = apply_target_style(big, 1);
  double m = 0;
  for (int k = 0; k < 64 * 64; ++k) m += t.at(static_cast<std::size_t>(64 * 64 + k));
  CHECK(m / (64 * 64) == doctest::Approx(g).epsilon(0.01));
}

TEST_CASE("construction invariant over many seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const StereoSample s = generate_scene(small(seed));
    const OcclusionMask m = occlusion_mask(s.disparity[0], s.disparity[1]);
    const Tensor rec = backward_warp(s.images[1], signed_offset(s.disparity[0].values, View::Left));
    double worst = 0;
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 64; ++i)
          if (m.mask.at(j, i) != 0) worst = std::max(worst, std::fabs(rec.at(c, j, i) - s.images[0].at(c, j, i)));
    CHECK_MESSAGE(worst <= 1e-6, "seed " << seed);
    for (double d : s.disparity[0].values.data()) CHECK((d >= 2.0 && d <= 14.0 && std::fmod(d * 2, 1.0) == 0.0));
  }
}

TEST_CASE("single full-frame layer") {
  SceneSpec s = small(3);
  s.num_layers = 1;
  const StereoSample x = generate_scene(s);
  const double d = x.disparity[0].values.at(0);
  for (int v = 0; v < 2; ++v)
    for (double e : x.disparity[v].values.data()) CHECK(e == d);
  const Tensor rec = backward_warp(x.images[1], signed_offset(x.disparity[0].values, View::Left));
  for (int j = 0; j < 32; ++j)
    for (int i = static_cast<int>(std::ceil(d)); i < 64; ++i) CHECK(std::fabs(rec.at(0, j, i) - x.images[0].at(0, j, i)) <= 1e-6);
}

TEST_CASE("occlusion mask equals ray-cast visibility") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SceneSpec s = small(seed);
    s.half_pixel = seed % 2 == 0;
    s.num_layers = 2 + static_cast<int>(seed % 3);
    const StereoSample x = generate_scene(s);
    const SceneLayout layout = scene_layout(s);
    for (int v = 0; v < 2; ++v) {
      const auto want = ref::covisible(s, layout.layers, v);
      const auto got = occlusion_mask(x.disparity[v], x.disparity[1 - v]).mask;
      int mismatches = 0;
      for (std::size_t k = 0; k < want.size(); ++k) mismatches += (got.at(k) != 0) != (want[k] != 0);
      CHECK_MESSAGE(mismatches == 0, "seed " << seed << " view " << v);
    }
  }
}

TEST_CASE("scene spec validation") {
  SceneSpec s = small(1);
  s.d_max_scene = 20;
  CHECK_THROWS_AS(generate_scene(s), InvalidArgument);
  s = small(1);
  s.d_min = 0;
  CHECK_THROWS_AS(generate_scene(s), InvalidArgument);
  s = small(1);
  s.num_layers = 0;
  CHECK_THROWS_AS(generate_scene(s), InvalidArgument);
}

TEST_CASE("PFM format") {
  Rng rng(1);
  const Tensor m = rng.normal_tensor({3, 5});
  const std::string bytes = encode_pfm(m);
  CHECK(bytes.rfind("Pf\n5 3\n-1.0\n", 0) == 0);
  const Tensor back = decode_pfm(bytes);
  for (std::size_t k = 0; k < m.numel(); ++k) CHECK(back.at(k) == static_cast<double>(static_cast<float>(m.at(k))));
  CHECK(encode_pfm(back) == bytes);
  CHECK(encode_pfm(Tensor(Shape{2, 4})).rfind("Pf\n4 2\n-1.0\n", 0) == 0);

  SUBCASE("bottom-to-top rows") {
    const Tensor t(Shape{2, 1}, std::vector<double>{1.0, 2.0});
    const std::string b = encode_pfm(t);
    float first;
    std::memcpy(&first, b.data() + std::strlen("Pf\n1 2\n-1.0\n"), 4);
    CHECK(first == 2.0f);
  }
  SUBCASE("big-endian fixture") {
    std::string b = "Pf\n2 1\n1.0\n";
    for (float f : {1.5f, -2.0f}) {
      unsigned char raw[4];
      std::memcpy(raw, &f, 4);
      for (int k = 3; k >= 0; --k) b.push_back(static_cast<char>(raw[k]));
    }
    const Tensor t = decode_pfm(b);
    CHECK(t.shape() == Shape{1, 2});
    CHECK(t.at(0) == 1.5);
    CHECK(t.at(1) == -2.0);
  }
  SUBCASE("errors carry byte offsets") {
    CHECK_THROWS_AS(decode_pfm("PF\n1 1\n-1.0\n...."), FormatError);
    try {
      decode_pfm("Pf\n2 2\n-1.0\nabc");
      FAIL("truncated payload accepted");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset() == std::strlen("Pf\n2 2\n-1.0\nabc"));
    }
  }
  CHECK_THROWS_AS(encode_pfm(Tensor(Shape{1, 1}, std::nan(""))), InvalidArgument);
}

TEST_CASE("PPM format") {
  Rng rng(2);
  const Tensor img = rng.uniform_tensor({3, 4, 5}, 0, 1);
  const std::string bytes = encode_ppm(img);
  CHECK(bytes.rfind("P6\n5 4\n255\n", 0) == 0);
  const Tensor back = decode_ppm(bytes);
  for (std::size_t k = 0; k < img.numel(); ++k) CHECK(std::fabs(back.at(k) - img.at(k)) <= 1.0 / 510 + 1e-15);
  CHECK(encode_ppm(back) == bytes);
  const Tensor bw(Shape{3, 1, 2}, std::vector<double>{0, 1, 0, 1, 0, 1});
  CHECK(decode_ppm(encode_ppm(bw)).values() == bw.values());
  // fixture: 0.5 rounds half up to 128
  const std::string one = encode_ppm(Tensor(Shape{3, 1, 1}, std::vector<double>{0.5, 0.0, 1.0}));
  CHECK(one == std::string("P6\n1 1\n255\n\x80\x00\xff", 14));
  CHECK_THROWS_AS(decode_ppm("P3\n1 1\n255\n000"), FormatError);
}

TEST_CASE("image files round-trip bit-exactly on disk") {
  const fs::path dir = scratch("io");
  Rng rng(3);
  const Tensor m = decode_pfm(encode_pfm(rng.normal_tensor({4, 6})));
  write_pfm(m, dir / "a.pfm");
  CHECK(read_pfm(dir / "a.pfm").values() == m.values());
  const Tensor img = decode_ppm(encode_ppm(rng.uniform_tensor({3, 4, 6}, 0, 1)));
  write_ppm(img, dir / "a.ppm");
  CHECK(read_ppm(dir / "a.ppm").values() == img.values());
  CHECK_THROWS_AS(read_pfm(dir / "missing.pfm"), IoError);
}

TEST_CASE("dataset on disk") {
  const fs::path dir = scratch("dataset");
  DatasetSpec spec;
  spec.height = 16;
  spec.width = 32;
  spec.n_source_train = 3;
  spec.n_source_val = 1;
  spec.n_target_train = 2;
  spec.n_target_test = 2;
  const auto rows = write_dataset(spec, dir);
  CHECK(rows.size() == 8);
  const auto manifest = read_manifest(dir);
  REQUIRE(manifest.size() == 8);
  CHECK(read_file(dir / kManifestName).rfind("seed,domain,split,index,left,right,disp_left,disp_right\n", 0) == 0);
  // spot check against regeneration
  const ManifestRow& r = manifest[5];
  const StereoSample loaded = load_sample(dir, r);
  const StereoSample fresh = generate_scene(dataset_scene(spec, r.split, r.index));
  CHECK(loaded.disparity[0].values.values() == decode_pfm(encode_pfm(fresh.disparity[0].values)).values());
  CHECK(loaded.images[1].values() == decode_ppm(encode_ppm(fresh.images[1])).values());
  CHECK(split_domain(r.split) == r.domain);
  // idempotent
  const std::string before = read_file(dir / "target_test" / "00001_left.ppm");
  write_dataset(spec, dir);
  CHECK(read_file(dir / "target_test" / "00001_left.ppm") == before);
  CHECK(load_split(dir, Split::TargetTrain).size() == 2);
  CHECK_THROWS_AS(load_split(dir / "nowhere", Split::TargetTrain), ConfigError);
  CHECK_THROWS_AS(parse_split("train"), ConfigError);
}
