#include "vwseg/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vwseg {

namespace {

struct OverlapCounts {
  std::int64_t inter = 0, pred = 0, gt = 0;
};

OverlapCounts count_overlap(std::span<const float> pred, std::span<const float> gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("metric inputs must have the same size");
  OverlapCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] > 0.5f, g = gt[i] > 0.5f;
    c.pred += p;
    c.gt += g;
    c.inter += (p && g);
  }
  return c;
}

}  // namespace

double dsc(std::span<const float> pred, std::span<const float> gt) {
  const OverlapCounts c = count_overlap(pred, gt);
  if (c.pred + c.gt == 0) return 1.0;
  return 2.0 * double(c.inter) / double(c.pred + c.gt);
}

double sensitivity(std::span<const float> pred, std::span<const float> gt) {
  const OverlapCounts c = count_overlap(pred, gt);
  if (c.gt == 0) return c.pred == 0 ? 1.0 : 0.0;
  return double(c.inter) / double(c.gt);
}

double iou(std::span<const float> pred, std::span<const float> gt) {
  const OverlapCounts c = count_overlap(pred, gt);
  const std::int64_t uni = c.pred + c.gt - c.inter;
  if (uni == 0) return 1.0;
  return double(c.inter) / double(uni);
}

double dsc(const Volume& pred, const Volume& gt) { return dsc(std::span(pred.data()), std::span(gt.data())); }
double sensitivity(const Volume& pred, const Volume& gt) {
  return sensitivity(std::span(pred.data()), std::span(gt.data()));
}
double iou(const Volume& pred, const Volume& gt) { return iou(std::span(pred.data()), std::span(gt.data())); }

std::vector<RocPoint> roc_curve(std::span<const float> prob, std::span<const float> gt,
                                int n_thresholds) {
  if (prob.size() != gt.size())
    throw std::invalid_argument("roc_curve: prob and gt must have the same size");
  if (n_thresholds < 2) throw std::invalid_argument("roc_curve: n_thresholds must be >= 2");

  std::int64_t n_pos = 0, n_neg = 0;
  for (float g : gt) (g > 0.5f ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc_curve: ground truth must contain both classes");

  std::vector<RocPoint> points;
  points.reserve(std::size_t(n_thresholds) + 2);
  for (int k = 0; k < n_thresholds; ++k) {
    const float thr = float(k) / float(n_thresholds - 1);
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
      if (prob[i] >= thr) (gt[i] > 0.5f ? tp : fp) += 1;
    }
    points.push_back({double(fp) / double(n_neg), double(tp) / double(n_pos)});
  }

  std::sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
  });
  if (points.front().fpr != 0.0 || points.front().tpr != 0.0)
    points.insert(points.begin(), {0.0, 0.0});
  if (points.back().fpr != 1.0 || points.back().tpr != 1.0) points.push_back({1.0, 1.0});
  return points;
}

std::vector<RocPoint> roc_curve(const Volume& prob, const Volume& gt, int n_thresholds) {
  if (!(prob.dims() == gt.dims()))
    throw std::invalid_argument("roc_curve: prob dims " + prob.dims().str() +
                                " != gt dims " + gt.dims().str());
  return roc_curve(std::span(prob.data()), std::span(gt.data()), n_thresholds);
}

double auc(const std::vector<RocPoint>& roc) {
  if (roc.size() < 2) throw std::invalid_argument("auc: need at least 2 ROC points");
  std::vector<RocPoint> pts = roc;
  std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
  });
  double area = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  return area;
}

MetricReport evaluate_pair(const Volume& prob, const Volume& mask, const Volume& gt,
                           int n_thresholds) {
  if (!(prob.dims() == gt.dims()) || !(mask.dims() == gt.dims()))
    throw std::invalid_argument("evaluate_pair: dim mismatch between prediction and ground truth");
  MetricReport r;
  r.dsc = dsc(mask, gt);
  r.sensitivity = sensitivity(mask, gt);
  r.iou = iou(mask, gt);
  std::int64_t n_gt = 0;
  for (float g : gt.data()) n_gt += (g > 0.5f);
  r.gt_empty = (n_gt == 0);
  r.n_thresholds = n_thresholds;
  if (!r.gt_empty && n_gt < gt.dims().voxels()) {
    r.roc = roc_curve(prob, gt, n_thresholds);
    r.auc = auc(r.roc);
  }
  return r;
}

void write_report_json(const MetricReport& report, const std::filesystem::path& path) {
  nlohmann::json j{{"dsc", report.dsc},
                   {"sensitivity", report.sensitivity},
                   {"iou", report.iou},
                   {"auc", report.auc},
                   {"n_thresholds", report.n_thresholds},
                   {"gt_empty", report.gt_empty}};
  nlohmann::json roc = nlohmann::json::array();
  for (const RocPoint& p : report.roc) roc.push_back({p.fpr, p.tpr});
  j["roc"] = roc;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

void write_roc_csv(const std::vector<RocPoint>& roc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "fpr,tpr\n";
  char line[64];
  for (const RocPoint& p : roc) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g\n", p.fpr, p.tpr);
    out << line;
  }
}

}  // namespace vwseg
