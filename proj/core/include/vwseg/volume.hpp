#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vwseg {

// Axis semantics for a (nx, ny, nz) volume. The stack direction of each view:
//   axial   -> slices indexed along z, in-plane (x, y), shape nx x ny
//   lateral -> slices indexed along y, in-plane (x, z), shape nx x nz
//   frontal -> slices indexed along x, in-plane (y, z), shape ny x nz
// z is the superior-inferior direction (the vessel runs along z), so axial
// slices are vessel cross-sections. This convention is used everywhere.
enum class Axis { axial, lateral, frontal };

enum class VolumeKind { intensity, probability, binary_mask };

const char* axis_name(Axis a);
const char* kind_name(VolumeKind k);
VolumeKind kind_from_name(const std::string& name);

struct Dims3 {
  int nx = 0, ny = 0, nz = 0;

  bool operator==(const Dims3&) const = default;
  std::int64_t voxels() const { return std::int64_t(nx) * ny * nz; }
  // Number of slices when stacking along `a`.
  int along(Axis a) const;
  std::string str() const;
};

// Dense 2D image, row-major.
struct Image2D {
  int rows = 0, cols = 0;
  std::vector<float> data;

  Image2D() = default;
  Image2D(int r, int c, float fill = 0.f) : rows(r), cols(c), data(std::size_t(r) * c, fill) {}

  float& at(int r, int c) { return data[std::size_t(r) * cols + c]; }
  float at(int r, int c) const { return data[std::size_t(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image2D& o) const { return rows == o.rows && cols == o.cols; }
};

// Dense 3D scalar volume. Storage is axis-0-major: voxel (x, y, z) lives at
// data[(x * ny + y) * nz + z], matching the on-disk raw layout.
class Volume {
 public:
  Volume() = default;
  Volume(Dims3 dims, VolumeKind kind, float fill = 0.f);

  const Dims3& dims() const { return dims_; }
  VolumeKind kind() const { return kind_; }
  void set_kind(VolumeKind k) { kind_ = k; }

  float& at(int x, int y, int z) { return data_[index(x, y, z)]; }
  float at(int x, int y, int z) const { return data_[index(x, y, z)]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  // Throws std::invalid_argument when the kind's value invariant is violated
  // (binary_mask must be exactly {0,1}, probability must lie in [0,1]).
  void validate() const;

 private:
  std::size_t index(int x, int y, int z) const {
    return (std::size_t(x) * dims_.ny + y) * dims_.nz + z;
  }

  Dims3 dims_{};
  VolumeKind kind_ = VolumeKind::intensity;
  std::vector<float> data_;
};

// Ordered 2D slices extracted along one axis, with enough metadata to
// reassemble the source volume.
struct SliceStack {
  std::vector<Image2D> slices;
  Axis axis = Axis::axial;
  Dims3 source_dims{};
  VolumeKind kind = VolumeKind::intensity;
};

struct SliceShape {
  int rows = 0, cols = 0;
  bool operator==(const SliceShape&) const = default;
};

// Per-view slice shapes implied by a working volume shape. The canonical
// working dims (320, 256, 128) give axial 320x256, lateral 320x128 and
// frontal 256x128.
struct SliceShapeTable {
  SliceShape axial, lateral, frontal;

  static SliceShapeTable for_dims(Dims3 d) {
    return {{d.nx, d.ny}, {d.nx, d.nz}, {d.ny, d.nz}};
  }
  SliceShape view(Axis a) const;
};

inline constexpr Dims3 kCanonicalDims{320, 256, 128};

// Per-image intensity rescale to [-1, 1]:
//   out(i,j) = 2 * ((I(i,j) - min(I)) / (max(I) - min(I)) - 0.5)
// A constant image maps to all zeros (the range midpoint).
Image2D rescale_intensity(const Image2D& image);

// Cross-sections at every index along `axis`; voxel values are copied
// unchanged. assemble() is the exact inverse.
SliceStack reslice(const Volume& volume, Axis axis);
Volume assemble(const SliceStack& stack);

enum class ResizeMode { continuous, label };

// Resize with align-corners coordinate mapping. `continuous` is bilinear,
// `label` is nearest-neighbor (never introduces new values; identity when the
// target shape equals the source shape).
Image2D resize_slice(const Image2D& image, int rows, int cols, ResizeMode mode);

// Trilinear (intensity/probability) or nearest (binary_mask) resample,
// composed from per-view slice resizes.
Volume resample_volume(const Volume& volume, Dims3 target);

// On-disk format: <base>.raw holds voxels in axis-0-major order as
// little-endian float32 (uint8 for binary masks); <base>.json is the sidecar
// {"dims": [nx, ny, nz], "kind": "..."}.
void save_volume(const Volume& volume, const std::filesystem::path& base);
Volume load_volume(const std::filesystem::path& base);

}  // namespace vwseg
