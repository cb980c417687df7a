#include "vwseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vwseg {

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::axial: return "axial";
    case Axis::lateral: return "lateral";
    case Axis::frontal: return "frontal";
  }
  return "?";
}

const char* kind_name(VolumeKind k) {
  switch (k) {
    case VolumeKind::intensity: return "intensity";
    case VolumeKind::probability: return "probability";
    case VolumeKind::binary_mask: return "binary_mask";
  }
  return "?";
}

VolumeKind kind_from_name(const std::string& name) {
  if (name == "intensity") return VolumeKind::intensity;
  if (name == "probability") return VolumeKind::probability;
  if (name == "binary_mask") return VolumeKind::binary_mask;
  throw std::invalid_argument("unknown volume kind: " + name);
}

int Dims3::along(Axis a) const {
  switch (a) {
    case Axis::axial: return nz;
    case Axis::lateral: return ny;
    case Axis::frontal: return nx;
  }
  return 0;
}

std::string Dims3::str() const {
  return "(" + std::to_string(nx) + ", " + std::to_string(ny) + ", " + std::to_string(nz) + ")";
}

SliceShape SliceShapeTable::view(Axis a) const {
  switch (a) {
    case Axis::axial: return axial;
    case Axis::lateral: return lateral;
    case Axis::frontal: return frontal;
  }
  return {};
}

Volume::Volume(Dims3 dims, VolumeKind kind, float fill)
    : dims_(dims), kind_(kind), data_(std::size_t(dims.voxels() > 0 ? dims.voxels() : 0), fill) {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
    throw std::invalid_argument("volume dims must all be >= 1, got " + dims.str());
}

void Volume::validate() const {
  if (kind_ == VolumeKind::binary_mask) {
    for (float v : data_)
      if (v != 0.f && v != 1.f)
        throw std::invalid_argument("binary_mask volume contains a value outside {0, 1}");
  } else if (kind_ == VolumeKind::probability) {
    for (float v : data_)
      if (!(v >= 0.f && v <= 1.f))
        throw std::invalid_argument("probability volume contains a value outside [0, 1]");
  }
}

Image2D rescale_intensity(const Image2D& image) {
  if (image.data.empty()) throw std::invalid_argument("rescale_intensity: empty image");
  auto [lo_it, hi_it] = std::minmax_element(image.data.begin(), image.data.end());
  const float lo = *lo_it, hi = *hi_it;
  Image2D out(image.rows, image.cols);
  if (hi == lo) return out;  // constant image -> range midpoint everywhere
  const float range = hi - lo;
  for (std::size_t i = 0; i < image.data.size(); ++i)
    out.data[i] = 2.f * ((image.data[i] - lo) / range - 0.5f);
  return out;
}

SliceStack reslice(const Volume& volume, Axis axis) {
  const Dims3 d = volume.dims();
  if (d.nx < 1 || d.ny < 1 || d.nz < 1)
    throw std::invalid_argument("reslice: volume dims must all be >= 1");

  SliceStack stack;
  stack.axis = axis;
  stack.source_dims = d;
  stack.kind = volume.kind();
  const int count = d.along(axis);
  stack.slices.reserve(count);

  switch (axis) {
    case Axis::axial:  // slice k: (i, j) -> (x=i, y=j, z=k)
      for (int k = 0; k < d.nz; ++k) {
        Image2D s(d.nx, d.ny);
        for (int i = 0; i < d.nx; ++i)
          for (int j = 0; j < d.ny; ++j) s.at(i, j) = volume.at(i, j, k);
        stack.slices.push_back(std::move(s));
      }
      break;
    case Axis::lateral:  // slice k: (i, j) -> (x=i, y=k, z=j)
      for (int k = 0; k < d.ny; ++k) {
        Image2D s(d.nx, d.nz);
        for (int i = 0; i < d.nx; ++i)
          for (int j = 0; j < d.nz; ++j) s.at(i, j) = volume.at(i, k, j);
        stack.slices.push_back(std::move(s));
      }
      break;
    case Axis::frontal:  // slice k: (i, j) -> (x=k, y=i, z=j)
      for (int k = 0; k < d.nx; ++k) {
        Image2D s(d.ny, d.nz);
        for (int i = 0; i < d.ny; ++i)
          for (int j = 0; j < d.nz; ++j) s.at(i, j) = volume.at(k, i, j);
        stack.slices.push_back(std::move(s));
      }
      break;
  }
  return stack;
}

Volume assemble(const SliceStack& stack) {
  const Dims3 d = stack.source_dims;
  const int count = d.along(stack.axis);
  if (int(stack.slices.size()) != count)
    throw std::invalid_argument("assemble: expected " + std::to_string(count) + " slices, got " +
                                std::to_string(stack.slices.size()));

  SliceShape expect{};
  switch (stack.axis) {
    case Axis::axial: expect = {d.nx, d.ny}; break;
    case Axis::lateral: expect = {d.nx, d.nz}; break;
    case Axis::frontal: expect = {d.ny, d.nz}; break;
  }
  for (const Image2D& s : stack.slices)
    if (s.rows != expect.rows || s.cols != expect.cols)
      throw std::invalid_argument("assemble: slice shape mismatch with source dims " + d.str());

  Volume out(d, stack.kind);
  switch (stack.axis) {
    case Axis::axial:
      for (int k = 0; k < d.nz; ++k)
        for (int i = 0; i < d.nx; ++i)
          for (int j = 0; j < d.ny; ++j) out.at(i, j, k) = stack.slices[k].at(i, j);
      break;
    case Axis::lateral:
      for (int k = 0; k < d.ny; ++k)
        for (int i = 0; i < d.nx; ++i)
          for (int j = 0; j < d.nz; ++j) out.at(i, k, j) = stack.slices[k].at(i, j);
      break;
    case Axis::frontal:
      for (int k = 0; k < d.nx; ++k)
        for (int i = 0; i < d.ny; ++i)
          for (int j = 0; j < d.nz; ++j) out.at(k, i, j) = stack.slices[k].at(i, j);
      break;
  }
  return out;
}

namespace {

// Align-corners source coordinate of destination index i. Identity whenever
// dst == src; the midpoint when dst == 1.
inline double src_coord(int i, int src, int dst) {
  if (dst == 1) return (src - 1) / 2.0;
  return double(i) * double(src - 1) / double(dst - 1);
}

}  // namespace

Image2D resize_slice(const Image2D& image, int rows, int cols, ResizeMode mode) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("resize_slice: target dims must be >= 1");
  if (image.rows < 1 || image.cols < 1)
    throw std::invalid_argument("resize_slice: empty source image");

  Image2D out(rows, cols);
  if (mode == ResizeMode::label) {
    for (int r = 0; r < rows; ++r) {
      const int sr = int(std::lround(src_coord(r, image.rows, rows)));
      for (int c = 0; c < cols; ++c) {
        const int sc = int(std::lround(src_coord(c, image.cols, cols)));
        out.at(r, c) = image.at(sr, sc);
      }
    }
    return out;
  }

  for (int r = 0; r < rows; ++r) {
    const double fy = src_coord(r, image.rows, rows);
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, image.rows - 1);
    const float wy = float(fy - y0);
    for (int c = 0; c < cols; ++c) {
      const double fx = src_coord(c, image.cols, cols);
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, image.cols - 1);
      const float wx = float(fx - x0);
      const float top = image.at(y0, x0) * (1.f - wx) + image.at(y0, x1) * wx;
      const float bot = image.at(y1, x0) * (1.f - wx) + image.at(y1, x1) * wx;
      out.at(r, c) = top * (1.f - wy) + bot * wy;
    }
  }
  return out;
}

Volume resample_volume(const Volume& volume, Dims3 target) {
  if (target.nx < 1 || target.ny < 1 || target.nz < 1)
    throw std::invalid_argument("resample_volume: target dims must all be >= 1, got " + target.str());
  if (volume.dims() == target) return volume;

  const ResizeMode mode =
      volume.kind() == VolumeKind::binary_mask ? ResizeMode::label : ResizeMode::continuous;

  // In-plane (x, y) first via axial slices, then z via lateral slices.
  SliceStack ax = reslice(volume, Axis::axial);
  for (Image2D& s : ax.slices) s = resize_slice(s, target.nx, target.ny, mode);
  ax.source_dims = {target.nx, target.ny, volume.dims().nz};
  Volume mid = assemble(ax);

  SliceStack lat = reslice(mid, Axis::lateral);
  for (Image2D& s : lat.slices) s = resize_slice(s, target.nx, target.nz, mode);
  lat.source_dims = target;
  return assemble(lat);
}

void save_volume(const Volume& volume, const std::filesystem::path& base) {
  const Dims3 d = volume.dims();
  std::filesystem::path raw = base;
  raw += ".raw";
  std::filesystem::path sidecar = base;
  sidecar += ".json";

  std::ofstream out(raw, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + raw.string());
  if (volume.kind() == VolumeKind::binary_mask) {
    std::vector<std::uint8_t> bytes(volume.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      const float v = volume.data()[i];
      if (v != 0.f && v != 1.f)
        throw std::invalid_argument("save_volume: binary mask contains non-{0,1} value");
      bytes[i] = std::uint8_t(v);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  } else {
    out.write(reinterpret_cast<const char*>(volume.data().data()),
              std::streamsize(volume.data().size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("short write: " + raw.string());

  nlohmann::json meta{{"dims", {d.nx, d.ny, d.nz}}, {"kind", kind_name(volume.kind())}};
  std::ofstream js(sidecar);
  if (!js) throw std::runtime_error("cannot open for writing: " + sidecar.string());
  js << meta.dump(2) << "\n";
}

Volume load_volume(const std::filesystem::path& base_in) {
  std::filesystem::path base = base_in;
  if (base.extension() == ".json" || base.extension() == ".raw") base.replace_extension();
  std::filesystem::path raw = base;
  raw += ".raw";
  std::filesystem::path sidecar = base;
  sidecar += ".json";

  std::ifstream js(sidecar);
  if (!js) throw std::runtime_error("cannot open sidecar: " + sidecar.string());
  nlohmann::json meta = nlohmann::json::parse(js);
  const auto dims_arr = meta.at("dims");
  if (!dims_arr.is_array() || dims_arr.size() != 3)
    throw std::runtime_error("sidecar dims must be a 3-element array: " + sidecar.string());
  Dims3 d{dims_arr[0].get<int>(), dims_arr[1].get<int>(), dims_arr[2].get<int>()};
  const VolumeKind kind = kind_from_name(meta.at("kind").get<std::string>());

  Volume vol(d, kind);
  std::ifstream in(raw, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open raw voxel file: " + raw.string());
  const std::size_t n = std::size_t(d.voxels());
  if (kind == VolumeKind::binary_mask) {
    std::vector<std::uint8_t> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(n));
    if (std::size_t(in.gcount()) != n)
      throw std::runtime_error("raw file size mismatch: " + raw.string());
    for (std::size_t i = 0; i < n; ++i) vol.data()[i] = float(bytes[i]);
  } else {
    in.read(reinterpret_cast<char*>(vol.data().data()), std::streamsize(n * sizeof(float)));
    if (std::size_t(in.gcount()) != n * sizeof(float))
      throw std::runtime_error("raw file size mismatch: " + raw.string());
  }
  vol.validate();
  return vol;
}

}  // namespace vwseg
