#pragma once

#include <array>

#include "vwseg/nn/network.hpp"
#include "vwseg/volume.hpp"

namespace vwseg {

// Per-voxel threshold: 1 iff prob >= threshold. prob must be a probability
// volume and threshold must lie in [0, 1].
Volume binarize(const Volume& prob, double threshold);

// One view of the inference graph: reslice along `axis`, resize each slice to
// the model's input shape, rescale to [-1, 1], forward in evaluation mode,
// resize probabilities back to the native slice shape, reassemble. The result
// is a probability volume with the input's dims.
Volume segment_view(const Volume& volume, Axis axis, nn::Network& net, int batch_size = 8);

// The three axial-oriented binary maps fed to the SAN (channel order: axial,
// lateral, frontal).
std::array<Volume, 3> per_view_binary_maps(const Volume& volume, nn::Network& mx,
                                           nn::Network& my, nn::Network& mz,
                                           double threshold = 0.5, int batch_size = 8);

struct SegmentationResult {
  Volume prob_axial;                    // SAN output, kind=probability
  Volume mask_axial;                    // binarize(prob_axial, threshold)
  std::array<Volume, 3> per_view_masks; // axial/lateral/frontal binary maps
  std::array<Volume, 3> per_view_probs; // raw per-view probability volumes
  double threshold = 0.5;
};

// Full tri-planar inference: per-view segmentation, binarization at
// `threshold`, reorientation to axial, slice-wise SAN fusion, final
// binarization.
SegmentationResult segment_volume(const Volume& volume, nn::Network& mx, nn::Network& my,
                                  nn::Network& mz, nn::Network& san, double threshold = 0.5,
                                  int batch_size = 8);

// Runs the SAN (evaluation mode) on the axial slices of three stacked binary
// maps; returns the fused probability volume.
Volume fuse_with_san(const std::array<Volume, 3>& view_masks, nn::Network& san,
                     int batch_size = 8);

}  // namespace vwseg
