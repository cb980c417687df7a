#include <doctest.h>

#include <random>

#include "../common/oracles.hpp"
#include "vwseg/fusion.hpp"
#include "vwseg/metrics.hpp"

using namespace vwseg;

namespace {

Volume random_prob(Dims3 d, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Volume v(d, VolumeKind::probability);
  for (float& x : v.data()) x = u(rng);
  return v;
}

Volume random_mask(Dims3 d, unsigned seed, double p = 0.5) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution coin(p);
  Volume v(d, VolumeKind::binary_mask);
  for (float& x : v.data()) x = coin(rng) ? 1.f : 0.f;
  return v;
}

nn::Network tiny_view_net(const char* name, int rows, int cols, unsigned seed) {
  nn::ModelSpec spec = nn::build_unet(name, rows, cols, 2, 4);
  return nn::Network(std::move(spec), nn::init_weights<float>(spec, seed));
}

}  // namespace

TEST_SUITE_BEGIN("fusion");

TEST_CASE("binarize boundary behaviour") {
  Volume prob({2, 2, 2}, VolumeKind::probability);
  prob.at(0, 0, 0) = 0.f;
  prob.at(1, 0, 0) = 0.5f;
  prob.at(0, 1, 0) = 0.999f;
  prob.at(1, 1, 1) = 1.f;

  Volume all = binarize(prob, 0.0);
  for (float v : all.data()) CHECK(v == 1.f);

  Volume strict = binarize(prob, 1.0);
  CHECK(strict.at(1, 1, 1) == 1.f);
  CHECK(strict.at(0, 1, 0) == 0.f);

  Volume half = binarize(prob, 0.5);
  CHECK(half.at(1, 0, 0) == 1.f);  // >= tie rule
  CHECK(half.at(0, 0, 0) == 0.f);

  CHECK_THROWS_AS(binarize(prob, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(binarize(prob, -0.1), std::invalid_argument);
  Volume intensity({2, 2, 2}, VolumeKind::intensity);
  CHECK_THROWS_AS(binarize(intensity, 0.5), std::invalid_argument);
}

TEST_CASE("segment_view preserves dims and the probability range") {
  const Dims3 d{24, 16, 8};
  std::mt19937 rng(3);
  Volume vol(d, VolumeKind::intensity);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (float& v : vol.data()) v = u(rng);

  nn::Network mx = tiny_view_net("M_x", d.nx, d.ny, 5);
  Volume prob = segment_view(vol, Axis::axial, mx);
  CHECK(prob.dims() == d);
  CHECK(prob.kind() == VolumeKind::probability);
  for (float v : prob.data()) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }

  // native lateral slices (24, 8) differ from the model shape -> exercises
  // the resize path both ways
  nn::Network my = tiny_view_net("M_y", 16, 12, 7);
  Volume prob_lat = segment_view(vol, Axis::lateral, my);
  CHECK(prob_lat.dims() == d);

  Volume again = segment_view(vol, Axis::axial, mx);
  CHECK(again.data() == prob.data());  // deterministic
}

TEST_CASE("averaging san reproduces the 2-of-3 majority vote bit-exactly") {
  const Dims3 d{12, 8, 6};
  nn::ModelSpec san_spec = nn::build_san("SAN", d.nx, d.ny);
  nn::Network san(san_spec, nn::averaging_san_weights<float>(san_spec));

  for (unsigned trial = 0; trial < 10; ++trial) {
    const std::array<Volume, 3> views = {random_mask(d, 100 + trial), random_mask(d, 200 + trial),
                                         random_mask(d, 300 + trial)};
    Volume fused = binarize(fuse_with_san(views, san), 0.5);
    for (int x = 0; x < d.nx; ++x)
      for (int y = 0; y < d.ny; ++y)
        for (int z = 0; z < d.nz; ++z) {
          const float expect = oracles::majority3(views[0].at(x, y, z), views[1].at(x, y, z),
                                                  views[2].at(x, y, z));
          CHECK(fused.at(x, y, z) == expect);
        }
  }
}

TEST_CASE("consensus input passes through the averaging san unchanged") {
  const Dims3 d{8, 8, 4};
  const Volume mask = random_mask(d, 9);
  nn::ModelSpec san_spec = nn::build_san("SAN", d.nx, d.ny);
  nn::Network san(san_spec, nn::averaging_san_weights<float>(san_spec));
  Volume fused = binarize(fuse_with_san({mask, mask, mask}, san), 0.5);
  CHECK(fused.data() == mask.data());
}

TEST_CASE("segment_volume wires the full graph") {
  const Dims3 d{16, 16, 8};
  std::mt19937 rng(11);
  Volume vol(d, VolumeKind::intensity);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (float& v : vol.data()) v = u(rng);

  nn::Network mx = tiny_view_net("M_x", d.nx, d.ny, 21);
  nn::Network my = tiny_view_net("M_y", d.nx, d.nz, 22);
  nn::Network mz = tiny_view_net("M_z", d.ny, d.nz, 23);
  nn::ModelSpec san_spec = nn::build_san("SAN", d.nx, d.ny);
  nn::Network san(san_spec, nn::init_weights<float>(san_spec, 24));

  SegmentationResult res = segment_volume(vol, mx, my, mz, san, 0.4);
  CHECK(res.threshold == 0.4);
  CHECK(res.prob_axial.dims() == d);
  CHECK(res.mask_axial.dims() == d);
  res.prob_axial.validate();
  res.mask_axial.validate();
  for (const Volume& m : res.per_view_masks) {
    CHECK(m.dims() == d);
    m.validate();
  }
  // mask is the binarization of prob at the stored threshold
  Volume rebin = binarize(res.prob_axial, res.threshold);
  CHECK(rebin.data() == res.mask_axial.data());

  CHECK_THROWS_AS(segment_volume(vol, mx, my, mz, san, 1.7), std::invalid_argument);
}

TEST_SUITE_END();
