#include "vwseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vwseg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void PhantomParams::validate() const {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
    throw std::invalid_argument("phantom dims must all be >= 1, got " + dims.str());
  if (lumen_radius <= 0) throw std::invalid_argument("lumen_radius must be > 0");
  if (wall_thickness <= 0) throw std::invalid_argument("wall_thickness must be > 0");
  if (noise_level < 0 || noise_level >= 1)
    throw std::invalid_argument("noise_level must lie in [0, 1)");
  if (drift_amplitude < 0) throw std::invalid_argument("drift_amplitude must be >= 0");
  if (drift_wavelength <= 0) throw std::invalid_argument("drift_wavelength must be > 0");
  if (shadow_strength < 0 || shadow_strength > 1)
    throw std::invalid_argument("shadow_strength must lie in [0, 1]");

  const double reach = drift_amplitude + lumen_radius + wall_thickness;
  const double half = (std::min(dims.nx, dims.ny) - 1) / 2.0;
  if (reach > half)
    throw std::invalid_argument("phantom geometry exceeds the cross-section: amplitude + radius "
                                "+ thickness = " +
                                std::to_string(reach) + " > " + std::to_string(half));
}

LabeledVolume generate_phantom(const PhantomParams& p) {
  p.validate();
  const Dims3 d = p.dims;

  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
  const double phase_x = uphase(rng);
  const double phase_y = uphase(rng);

  // Per-slice centerline, drifting sinusoidally along z.
  std::vector<double> cx(d.nz), cy(d.nz);
  const double x0 = (d.nx - 1) / 2.0, y0 = (d.ny - 1) / 2.0;
  for (int z = 0; z < d.nz; ++z) {
    const double t = 2.0 * kPi * z / p.drift_wavelength;
    cx[z] = x0 + p.drift_amplitude * std::sin(t + phase_x);
    cy[z] = y0 + p.drift_amplitude * std::sin(t + phase_y);
  }

  LabeledVolume out{Volume(d, VolumeKind::intensity), Volume(d, VolumeKind::binary_mask)};
  const double r = p.lumen_radius, rt = p.lumen_radius + p.wall_thickness;

  for (int x = 0; x < d.nx; ++x)
    for (int y = 0; y < d.ny; ++y)
      for (int z = 0; z < d.nz; ++z) {
        const double dist = std::hypot(x - cx[z], y - cy[z]);
        float base = p.intensity.background;
        if (dist < r)
          base = p.intensity.lumen;
        else if (dist < rt) {
          base = p.intensity.wall;
          out.wall_mask.at(x, y, z) = 1.f;
        }
        out.image.at(x, y, z) = base;
      }

  // Acoustic-shadow style attenuation: darkening cones cast along +y below a
  // random start depth, localized in (x, z).
  if (p.shadow_count > 0 && p.shadow_strength > 0) {
    std::uniform_real_distribution<double> ux(0.0, d.nx - 1.0);
    std::uniform_real_distribution<double> uz(0.0, d.nz - 1.0);
    std::uniform_real_distribution<double> uy(d.ny * 0.25, d.ny * 0.75);
    std::uniform_real_distribution<double> uw(2.0, 5.0);
    for (int s = 0; s < p.shadow_count; ++s) {
      const double sx = ux(rng), sz = uz(rng), sy = uy(rng);
      const double wx = uw(rng), wz = uw(rng) * 2.0;
      for (int x = 0; x < d.nx; ++x) {
        const double ax = (x - sx) / wx;
        if (ax * ax > 9.0) continue;
        for (int z = 0; z < d.nz; ++z) {
          const double az = (z - sz) / wz;
          const double fall = std::exp(-(ax * ax + az * az));
          if (fall < 1e-3) continue;
          const float atten = float(1.0 - p.shadow_strength * fall);
          for (int y = int(sy); y < d.ny; ++y) out.image.at(x, y, z) *= atten;
        }
      }
    }
  }

  // Per-axial-slice gain wobble (stronger degradation of single axial slices
  // than of longitudinal views, which integrate over many z).
  if (p.slice_gain_jitter > 0) {
    std::uniform_real_distribution<double> ug(-1.0, 1.0);
    std::vector<float> gain(d.nz);
    for (int z = 0; z < d.nz; ++z) gain[z] = float(1.0 + p.slice_gain_jitter * ug(rng));
    for (int x = 0; x < d.nx; ++x)
      for (int y = 0; y < d.ny; ++y)
        for (int z = 0; z < d.nz; ++z) out.image.at(x, y, z) *= gain[z];
  }

  // Multiplicative speckle, then clip to [0, 1].
  if (p.noise_level > 0) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (float& v : out.image.data()) v = float(v * (1.0 + p.noise_level * g(rng)));
  }
  for (float& v : out.image.data()) v = std::clamp(v, 0.f, 1.f);

  return out;
}

std::string mask_path_for(const std::string& volume_base) { return volume_base + "_mask"; }

PhantomParams default_params_for(Dims3 dims) {
  const double m = std::min(dims.nx, dims.ny);
  PhantomParams p;
  p.dims = dims;
  p.lumen_radius = 0.16 * m;
  p.wall_thickness = std::max(1.5, 0.07 * m);
  p.drift_amplitude = 0.08 * m;
  p.drift_wavelength = std::max(8.0, double(dims.nz));
  return p;
}

PhantomRange default_range_for(Dims3 dims) {
  const double m = std::min(dims.nx, dims.ny);
  PhantomRange r;
  r.dims = dims;
  r.lumen_radius = {0.13 * m, 0.18 * m};
  r.wall_thickness = {std::max(1.5, 0.055 * m), std::max(2.0, 0.085 * m)};
  r.drift_amplitude = {0.04 * m, 0.09 * m};
  r.drift_wavelength = {0.75 * std::max(8.0, double(dims.nz)), 1.5 * std::max(8.0, double(dims.nz))};
  return r;
}

namespace {

double sample(std::mt19937_64& rng, const ParamRange& r) {
  if (r.hi <= r.lo) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

nlohmann::json range_to_json(const PhantomRange& r) {
  return nlohmann::json{
      {"dims", {r.dims.nx, r.dims.ny, r.dims.nz}},
      {"lumen_radius", {r.lumen_radius.lo, r.lumen_radius.hi}},
      {"wall_thickness", {r.wall_thickness.lo, r.wall_thickness.hi}},
      {"drift_amplitude", {r.drift_amplitude.lo, r.drift_amplitude.hi}},
      {"drift_wavelength", {r.drift_wavelength.lo, r.drift_wavelength.hi}},
      {"noise_level", {r.noise_level.lo, r.noise_level.hi}},
      {"intensity", {r.intensity.lumen, r.intensity.wall, r.intensity.background}},
      {"slice_gain_jitter", r.slice_gain_jitter},
      {"shadow_count", r.shadow_count},
      {"shadow_strength", r.shadow_strength},
  };
}

ParamRange range_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

PhantomRange params_from_json(const nlohmann::json& j) {
  PhantomRange r;
  const auto& dims = j.at("dims");
  r.dims = {dims.at(0).get<int>(), dims.at(1).get<int>(), dims.at(2).get<int>()};
  r.lumen_radius = range_from_json(j.at("lumen_radius"));
  r.wall_thickness = range_from_json(j.at("wall_thickness"));
  r.drift_amplitude = range_from_json(j.at("drift_amplitude"));
  r.drift_wavelength = range_from_json(j.at("drift_wavelength"));
  r.noise_level = range_from_json(j.at("noise_level"));
  const auto& in = j.at("intensity");
  r.intensity = {in.at(0).get<float>(), in.at(1).get<float>(), in.at(2).get<float>()};
  r.slice_gain_jitter = j.at("slice_gain_jitter").get<double>();
  r.shadow_count = j.at("shadow_count").get<int>();
  r.shadow_strength = j.at("shadow_strength").get<double>();
  return r;
}

}  // namespace

Manifest make_dataset(int n_volumes, const PhantomRange& range, std::uint64_t seed,
                      const std::filesystem::path& out_dir, double train_ratio) {
  if (n_volumes < 1) throw std::invalid_argument("make_dataset: n_volumes must be >= 1");
  if (train_ratio <= 0 || train_ratio > 1)
    throw std::invalid_argument("make_dataset: train_ratio must lie in (0, 1]");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec && !std::filesystem::is_directory(out_dir))
    throw std::runtime_error("make_dataset: cannot create " + out_dir.string());

  Manifest manifest;
  manifest.seed = seed;
  manifest.params = range;

  std::mt19937_64 rng(seed);
  int n_train = std::min<int>(n_volumes, int(std::ceil(train_ratio * n_volumes)));
  if (n_train == n_volumes && n_volumes > 1 && train_ratio < 1.0) n_train = n_volumes - 1;

  for (int i = 0; i < n_volumes; ++i) {
    PhantomParams p;
    p.dims = range.dims;
    p.lumen_radius = sample(rng, range.lumen_radius);
    p.wall_thickness = sample(rng, range.wall_thickness);
    p.drift_amplitude = sample(rng, range.drift_amplitude);
    p.drift_wavelength = sample(rng, range.drift_wavelength);
    p.noise_level = sample(rng, range.noise_level);
    p.intensity = range.intensity;
    p.slice_gain_jitter = range.slice_gain_jitter;
    p.shadow_count = range.shadow_count;
    p.shadow_strength = range.shadow_strength;
    p.seed = rng();

    LabeledVolume vol = generate_phantom(p);

    char name[32];
    std::snprintf(name, sizeof(name), "vol_%03d", i);
    save_volume(vol.image, out_dir / name);
    save_volume(vol.wall_mask, out_dir / mask_path_for(name));
    if (i < n_train)
      manifest.train.push_back(name);
    else
      manifest.test.push_back(name);
  }

  if (manifest.test.empty())
    std::cerr << "warning: dataset of " << n_volumes
              << " volume(s) leaves the test split empty\n";

  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j{{"train", manifest.train},
                   {"test", manifest.test},
                   {"seed", manifest.seed},
                   {"params", range_to_json(manifest.params)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  Manifest m;
  m.train = j.at("train").get<std::vector<std::string>>();
  m.test = j.at("test").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.params = params_from_json(j.at("params"));
  return m;
}

}  // namespace vwseg
