#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "vwseg/volume.hpp"

namespace vwseg {

// Voxelwise overlap metrics over binary maps (any value > 0.5 counts as
// foreground). Conventions for the undefined corners:
//   dsc/iou with both maps empty      -> 1.0 (perfect agreement)
//   sensitivity with empty ground truth -> 1.0 if pred empty, else 0.0
double dsc(std::span<const float> pred, std::span<const float> gt);
double sensitivity(std::span<const float> pred, std::span<const float> gt);
double iou(std::span<const float> pred, std::span<const float> gt);

double dsc(const Volume& pred, const Volume& gt);
double sensitivity(const Volume& pred, const Volume& gt);
double iou(const Volume& pred, const Volume& gt);

struct RocPoint {
  double fpr = 0, tpr = 0;
};

// Threshold sweep over n_thresholds evenly spaced cut points in [0, 1]
// inclusive, with "predicted positive iff prob >= threshold". Points are
// sorted by (fpr, tpr) and the (0,0) / (1,1) endpoints are appended when the
// sweep does not produce them. Throws when gt lacks one of the two classes.
std::vector<RocPoint> roc_curve(std::span<const float> prob, std::span<const float> gt,
                                int n_thresholds = 101);
std::vector<RocPoint> roc_curve(const Volume& prob, const Volume& gt, int n_thresholds = 101);

// Trapezoidal area under an fpr-sorted ROC point list.
double auc(const std::vector<RocPoint>& roc);

struct MetricReport {
  double dsc = 0, sensitivity = 0, iou = 0;
  std::vector<RocPoint> roc;
  double auc = 0;
  int n_thresholds = 0;
  bool gt_empty = false;  // sensitivity convention was applied
};

// Full per-volume report for one (probability, mask, ground truth) triple.
MetricReport evaluate_pair(const Volume& prob, const Volume& mask, const Volume& gt,
                           int n_thresholds = 101);

void write_report_json(const MetricReport& report, const std::filesystem::path& path);

// One "fpr,tpr" line per point, after a header line.
void write_roc_csv(const std::vector<RocPoint>& roc, const std::filesystem::path& path);

}  // namespace vwseg
