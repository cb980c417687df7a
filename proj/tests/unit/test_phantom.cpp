#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vwseg/phantom.hpp"

using namespace vwseg;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PhantomParams straight_params() {
  PhantomParams p;
  p.dims = {48, 48, 8};
  p.drift_amplitude = 0;
  p.lumen_radius = 10;
  p.wall_thickness = 4;
  p.noise_level = 0;
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("phantom");

TEST_CASE("straight noiseless tube gives exact annuli") {
  const PhantomParams p = straight_params();
  LabeledVolume lv = generate_phantom(p);
  const double cx = (p.dims.nx - 1) / 2.0, cy = (p.dims.ny - 1) / 2.0;
  for (int x = 0; x < p.dims.nx; ++x)
    for (int y = 0; y < p.dims.ny; ++y) {
      const double d = std::hypot(x - cx, y - cy);
      const bool in_wall = d >= p.lumen_radius && d < p.lumen_radius + p.wall_thickness;
      for (int z = 0; z < p.dims.nz; ++z) {
        CHECK(lv.wall_mask.at(x, y, z) == (in_wall ? 1.f : 0.f));
        const float expect = d < p.lumen_radius ? p.intensity.lumen
                             : in_wall          ? p.intensity.wall
                                                : p.intensity.background;
        CHECK(lv.image.at(x, y, z) == expect);
      }
    }
}

TEST_CASE("wall voxel count per slice is close to the analytic annulus area") {
  const PhantomParams p = straight_params();
  LabeledVolume lv = generate_phantom(p);
  const double r = p.lumen_radius, t = p.wall_thickness;
  const double analytic = 3.14159265358979 * ((r + t) * (r + t) - r * r);
  for (int z = 0; z < p.dims.nz; ++z) {
    int count = 0;
    for (int x = 0; x < p.dims.nx; ++x)
      for (int y = 0; y < p.dims.ny; ++y) count += int(lv.wall_mask.at(x, y, z));
    CHECK(count > analytic * 0.85);
    CHECK(count < analytic * 1.15);
  }
}

TEST_CASE("generation is deterministic under the seed") {
  PhantomParams p = default_params_for({24, 24, 8});
  p.noise_level = 0.2;
  p.slice_gain_jitter = 0.1;
  p.shadow_count = 2;
  p.shadow_strength = 0.5;
  p.seed = 99;
  LabeledVolume a = generate_phantom(p);
  LabeledVolume b = generate_phantom(p);
  CHECK(a.image.data() == b.image.data());
  CHECK(a.wall_mask.data() == b.wall_mask.data());

  p.seed = 100;
  LabeledVolume c = generate_phantom(p);
  CHECK(a.image.data() != c.image.data());
}

TEST_CASE("image values stay inside [0, 1] under heavy noise") {
  PhantomParams p = default_params_for({32, 32, 8});
  p.noise_level = 0.8;
  p.seed = 5;
  LabeledVolume lv = generate_phantom(p);
  for (float v : lv.image.data()) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
}

TEST_CASE("geometry exceeding the cross-section is rejected") {
  PhantomParams p;
  p.dims = {32, 32, 8};
  p.lumen_radius = 14;
  p.wall_thickness = 4;
  CHECK_THROWS_AS(generate_phantom(p), std::invalid_argument);
  p.lumen_radius = 9;
  p.drift_amplitude = 8;
  CHECK_THROWS_AS(generate_phantom(p), std::invalid_argument);
  p.noise_level = -0.1;
  CHECK_THROWS_AS(generate_phantom(p), std::invalid_argument);
}

TEST_CASE("dataset split arithmetic and disjointness") {
  const auto dir = std::filesystem::temp_directory_path() / "vwseg_phantom_ds_test";
  std::filesystem::remove_all(dir);
  PhantomRange range = default_range_for({32, 32, 4});

  Manifest m5 = make_dataset(5, range, 7, dir / "n5");
  CHECK(m5.train.size() == 4);
  CHECK(m5.test.size() == 1);
  for (const std::string& tr : m5.train)
    for (const std::string& te : m5.test) CHECK(tr != te);

  Manifest m1 = make_dataset(1, range, 7, dir / "n1");
  CHECK(m1.train.size() == 1);
  CHECK(m1.test.empty());

  CHECK_THROWS_AS(make_dataset(0, range, 7, dir / "n0"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("same seed gives byte-identical datasets") {
  const auto dir = std::filesystem::temp_directory_path() / "vwseg_phantom_repro_test";
  std::filesystem::remove_all(dir);
  PhantomRange range = default_range_for({24, 24, 4});
  make_dataset(3, range, 42, dir / "a");
  make_dataset(3, range, 42, dir / "b");
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(slurp(dir / "a" / "vol_000.raw") == slurp(dir / "b" / "vol_000.raw"));
  CHECK(slurp(dir / "a" / "vol_002_mask.raw") == slurp(dir / "b" / "vol_002_mask.raw"));

  Manifest loaded = load_manifest(dir / "a" / "manifest.json");
  CHECK(loaded.train.size() == 2);
  CHECK(loaded.test.size() == 1);
  CHECK(loaded.seed == 42);

  // manifest paths resolve to loadable volumes
  Volume img = load_volume(dir / "a" / loaded.train[0]);
  CHECK(img.dims() == range.dims);
  Volume mask = load_volume(dir / "a" / mask_path_for(loaded.train[0]));
  CHECK(mask.kind() == VolumeKind::binary_mask);
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
