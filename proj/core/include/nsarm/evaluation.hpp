#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nsarm/tensor.hpp"

namespace nsarm {

// BT.601 luma, full range: 0.299 R + 0.587 G + 0.114 B. [H,W,3] -> [H,W].
Tensor luma(const Tensor& image);

// Y-channel PSNR in dB; identical images give +infinity.
double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0);
// Single-scale Y-channel SSIM, 11x11 Gaussian window (sigma 1.5), averaged
// over all window positions that fit inside the image.
double ssim(const Tensor& a, const Tensor& b, double max_val = 1.0);

struct ScoreRow {
  std::string image_id;
  std::string dataset;
  std::string metric;
  double score = 0.0;
};

class ScoreTable {
 public:
  // Rejects non-finite scores and duplicate (image_id, dataset, metric).
  void add(ScoreRow row);
  const std::vector<ScoreRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  // Scores of one metric on one dataset, in insertion order.
  std::vector<double> scores(const std::string& dataset, const std::string& metric) const;
  // Image ids of a dataset in first-seen order.
  std::vector<std::string> images(const std::string& dataset) const;
  std::vector<std::string> datasets() const;
  std::vector<std::string> metrics() const;
  // Throws std::out_of_range when absent.
  double at(const std::string& image_id, const std::string& dataset, const std::string& metric) const;

  // "image_id,dataset,metric,score" with header.
  static ScoreTable parse_csv(const std::string& text);
  std::string to_csv() const;

 private:
  std::vector<ScoreRow> rows_;
  std::map<std::string, std::size_t> index_;
};

struct FailureCounts {
  std::size_t deficient = 0;
  std::size_t poor = 0;
  std::size_t collapse = 0;
  double mu_g = 0.0;
  std::size_t n = 0;
};

// Counts x_i < mu_G, x_i < 0.9 mu_G and x_i < 0.8 mu_G. The thresholds
// presume a positive-valued metric, so a negative mean is rejected.
FailureCounts failure_counts(std::span<const double> scores);

struct CurveRow {
  std::size_t rank = 0;
  std::string image_id;
  double avg_score = 0.0;
};

// Multiplier applied to a metric before averaging; unlisted metrics use 1.
using MetricScales = std::map<std::string, double>;
MetricScales default_metric_scales();

// Per-image scaled average over `metrics`, sorted by (score desc, image_id asc).
std::vector<CurveRow> sorted_curve(const ScoreTable& table, const std::string& dataset,
                                   const std::vector<std::string>& metrics,
                                   const MetricScales& scales = default_metric_scales());

struct VarianceReport {
  double mean = 0.0;
  double variance = 0.0;  // population, 1/N
  std::size_t n = 0;
};

VarianceReport variance_report(const ScoreTable& table, const std::string& dataset, const std::string& metric);
VarianceReport population_stats(std::span<const double> values);

std::string curve_csv(const std::vector<CurveRow>& rows);
// Minimal polyline chart of avg_score against rank.
std::string curve_svg(const std::vector<CurveRow>& rows, const std::string& title);

struct FailureReportRow {
  std::string dataset;
  std::string metric_set;
  FailureCounts counts;
};

// "dataset,metric_set,mu_g,n,deficient,poor,collapse"
std::string failure_report_csv(const std::vector<FailureReportRow>& rows);

}  // namespace nsarm
