#include "vwseg/fusion.hpp"

#include <algorithm>
#include <stdexcept>

namespace vwseg {

Volume binarize(const Volume& prob, double threshold) {
  if (prob.kind() != VolumeKind::probability)
    throw std::invalid_argument("binarize: input must be a probability volume");
  if (threshold < 0.0 || threshold > 1.0)
    throw std::invalid_argument("binarize: threshold must lie in [0, 1]");
  Volume out(prob.dims(), VolumeKind::binary_mask);
  const float thr = float(threshold);
  for (std::size_t i = 0; i < prob.data().size(); ++i)
    out.data()[i] = prob.data()[i] >= thr ? 1.f : 0.f;
  return out;
}

Volume segment_view(const Volume& volume, Axis axis, nn::Network& net, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("segment_view: batch_size must be >= 1");
  const int rows = net.spec().input_rows, cols = net.spec().input_cols;
  if (net.spec().input_channels != 1)
    throw std::invalid_argument("segment_view: per-view models take single-channel slices");

  SliceStack stack = reslice(volume, axis);
  const int n_slices = int(stack.slices.size());
  const int native_rows = stack.slices[0].rows, native_cols = stack.slices[0].cols;

  SliceStack out_stack;
  out_stack.axis = axis;
  out_stack.source_dims = volume.dims();
  out_stack.kind = VolumeKind::probability;
  out_stack.slices.resize(n_slices);

  nn::Tensor batch;
  for (int start = 0; start < n_slices; start += batch_size) {
    const int nb = std::min(batch_size, n_slices - start);
    if (batch.n != nb || batch.h != rows || batch.w != cols) batch = nn::Tensor(nb, 1, rows, cols);
    for (int s = 0; s < nb; ++s) {
      Image2D resized =
          resize_slice(stack.slices[std::size_t(start) + s], rows, cols, ResizeMode::continuous);
      Image2D scaled = rescale_intensity(resized);
      std::copy(scaled.data.begin(), scaled.data.end(), batch.plane(s, 0));
    }
    const nn::Tensor& probs = net.forward(batch, /*training=*/false);
    for (int s = 0; s < nb; ++s) {
      Image2D p(rows, cols);
      std::copy(probs.plane(s, 0), probs.plane(s, 0) + p.size(), p.data.begin());
      out_stack.slices[std::size_t(start) + s] =
          resize_slice(p, native_rows, native_cols, ResizeMode::continuous);
    }
  }

  Volume out = assemble(out_stack);
  // bilinear interpolation of sigmoid outputs stays inside [0, 1] up to
  // rounding; clamp the stragglers so the probability invariant holds
  for (float& v : out.data()) v = std::clamp(v, 0.f, 1.f);
  return out;
}

std::array<Volume, 3> per_view_binary_maps(const Volume& volume, nn::Network& mx, nn::Network& my,
                                           nn::Network& mz, double threshold, int batch_size) {
  return {binarize(segment_view(volume, Axis::axial, mx, batch_size), threshold),
          binarize(segment_view(volume, Axis::lateral, my, batch_size), threshold),
          binarize(segment_view(volume, Axis::frontal, mz, batch_size), threshold)};
}

Volume fuse_with_san(const std::array<Volume, 3>& view_masks, nn::Network& san, int batch_size) {
  const Dims3 d = view_masks[0].dims();
  for (const Volume& v : view_masks)
    if (!(v.dims() == d))
      throw std::invalid_argument("fuse_with_san: per-view maps must share dims");
  if (san.spec().input_channels != 3)
    throw std::invalid_argument("fuse_with_san: SAN takes 3 input channels");

  const std::array<SliceStack, 3> stacks = {reslice(view_masks[0], Axis::axial),
                                            reslice(view_masks[1], Axis::axial),
                                            reslice(view_masks[2], Axis::axial)};
  SliceStack fused;
  fused.axis = Axis::axial;
  fused.source_dims = d;
  fused.kind = VolumeKind::probability;
  fused.slices.resize(std::size_t(d.nz));

  nn::Tensor batch;
  for (int start = 0; start < d.nz; start += batch_size) {
    const int nb = std::min(batch_size, d.nz - start);
    if (batch.n != nb || batch.h != d.nx || batch.w != d.ny)
      batch = nn::Tensor(nb, 3, d.nx, d.ny);
    for (int s = 0; s < nb; ++s)
      for (int c = 0; c < 3; ++c) {
        const Image2D& slice = stacks[std::size_t(c)].slices[std::size_t(start) + s];
        std::copy(slice.data.begin(), slice.data.end(), batch.plane(s, c));
      }
    const nn::Tensor& probs = san.forward(batch, /*training=*/false);
    for (int s = 0; s < nb; ++s) {
      Image2D p(d.nx, d.ny);
      std::copy(probs.plane(s, 0), probs.plane(s, 0) + p.size(), p.data.begin());
      fused.slices[std::size_t(start) + s] = std::move(p);
    }
  }
  return assemble(fused);
}

SegmentationResult segment_volume(const Volume& volume, nn::Network& mx, nn::Network& my,
                                  nn::Network& mz, nn::Network& san, double threshold,
                                  int batch_size) {
  if (threshold < 0.0 || threshold > 1.0)
    throw std::invalid_argument("segment_volume: threshold must lie in [0, 1]");

  SegmentationResult result;
  result.threshold = threshold;
  result.per_view_probs = {segment_view(volume, Axis::axial, mx, batch_size),
                           segment_view(volume, Axis::lateral, my, batch_size),
                           segment_view(volume, Axis::frontal, mz, batch_size)};
  for (int i = 0; i < 3; ++i)
    result.per_view_masks[std::size_t(i)] =
        binarize(result.per_view_probs[std::size_t(i)], threshold);
  result.prob_axial = fuse_with_san(result.per_view_masks, san, batch_size);
  result.mask_axial = binarize(result.prob_axial, threshold);
  return result;
}

}  // namespace vwseg
