#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vwseg/volume.hpp"

namespace vwseg {

struct IntensityProfile {
  float lumen = 0.12f;
  float wall = 0.78f;
  float background = 0.40f;
};

// Synthetic carotid-like tube: a lumen of radius `lumen_radius` around a
// sinusoidally drifting centerline, wrapped by a wall annulus of
// `wall_thickness`. The wall annulus is the ground-truth mask.
struct PhantomParams {
  Dims3 dims{64, 64, 32};
  double drift_amplitude = 4.0;    // centerline sway, voxels
  double drift_wavelength = 32.0;  // sway period along z, voxels
  double lumen_radius = 9.0;       // voxels
  double wall_thickness = 3.5;     // voxels
  double noise_level = 0.15;       // multiplicative speckle std, in [0, 1)
  IntensityProfile intensity;

  // Anisotropic acquisition artifacts; all default off.
  double slice_gain_jitter = 0.0;  // per-axial-slice gain wobble
  int shadow_count = 0;            // attenuation shadows cast along +y
  double shadow_strength = 0.0;    // in [0, 1]

  std::uint64_t seed = 0;

  // Throws std::invalid_argument when the tube cannot fit the cross-section.
  void validate() const;
};

struct LabeledVolume {
  Volume image;      // kind=intensity, values in [0, 1]
  Volume wall_mask;  // kind=binary_mask, the annulus between lumen and outer wall
};

// Deterministic under params.seed. For each axial plane the mask is exactly
// { voxel : lumen_radius <= dist(voxel, centerline) < lumen_radius + wall_thickness }.
LabeledVolume generate_phantom(const PhantomParams& params);

struct ParamRange {
  double lo = 0, hi = 0;
};

// Bounds for per-volume randomization in make_dataset.
struct PhantomRange {
  Dims3 dims{64, 64, 32};
  ParamRange lumen_radius{8.0, 11.0};
  ParamRange wall_thickness{3.0, 5.0};
  ParamRange drift_amplitude{2.0, 5.0};
  ParamRange drift_wavelength{24.0, 48.0};
  ParamRange noise_level{0.10, 0.20};
  IntensityProfile intensity;
  double slice_gain_jitter = 0.0;
  int shadow_count = 0;
  double shadow_strength = 0.0;
};

// Tube geometry scaled to the cross-section (lumen radius about 16% of the
// smaller in-plane extent, one drift period along z), valid at any dims.
PhantomParams default_params_for(Dims3 dims);
PhantomRange default_range_for(Dims3 dims);

struct Manifest {
  std::vector<std::string> train;  // volume base paths, relative to the manifest dir
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  PhantomRange params;
};

// Path of the ground-truth mask companion of a volume base path.
std::string mask_path_for(const std::string& volume_base);

// Writes n_volumes image+mask pairs under out_dir plus manifest.json. The
// train/test split is by whole volume, never by slice; train gets
// ceil(train_ratio * n) volumes. Returns the manifest (also written to disk).
Manifest make_dataset(int n_volumes, const PhantomRange& range, std::uint64_t seed,
                      const std::filesystem::path& out_dir, double train_ratio = 0.8);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace vwseg
