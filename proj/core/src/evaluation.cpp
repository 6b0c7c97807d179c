#include "nsarm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace nsarm {

Tensor luma(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("luma expects [H,W,3], got " + shape_str(image.shape()));
  const std::size_t H = image.dim(0), W = image.dim(1);
  Tensor y({H, W});
  for (std::size_t i = 0; i < H * W; ++i) {
    const float* p = image.ptr() + 3 * i;
    y[i] = static_cast<float>(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
  }
  return y;
}

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("metric inputs differ in shape: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) total += w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
  for (double& v : w) v /= total;
  return w;
}

// Separable 'valid' filtering of an [H,W] field.
std::vector<double> filter_valid(const std::vector<double>& x, std::size_t H, std::size_t W,
                                 const std::vector<double>& w) {
  const std::size_t k = w.size(), oh = H - k + 1, ow = W - k + 1;
  std::vector<double> tmp(H * ow), out(oh * ow);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += w[t] * x[i * W + j + t];
      tmp[i * ow + j] = acc;
    }
  }
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += w[t] * tmp[(i + t) * ow + j];
      out[i * ow + j] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double max_val) {
  check_pair(a, b);
  if (!(max_val > 0.0)) throw std::invalid_argument("psnr: max_val must be positive");
  const Tensor ya = luma(a), yb = luma(b);
  double se = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) {
    const double d = static_cast<double>(ya[i]) - yb[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(ya.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const Tensor& a, const Tensor& b, double max_val) {
  check_pair(a, b);
  constexpr std::size_t kWin = 11;
  if (a.rank() != 3 || a.dim(0) < kWin || a.dim(1) < kWin) {
    throw ShapeError("ssim needs images of at least 11x11, got " + shape_str(a.shape()));
  }
  const Tensor ya = luma(a), yb = luma(b);
  const std::size_t H = ya.dim(0), W = ya.dim(1), n = H * W;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = ya[i];
    y[i] = yb[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto w = gaussian_window(kWin, 1.5);
  const auto mx = filter_valid(x, H, W, w), my = filter_valid(y, H, W, w);
  const auto sxx = filter_valid(xx, H, W, w), syy = filter_valid(yy, H, W, w), sxy = filter_valid(xy, H, W, w);
  const double c1 = (0.01 * max_val) * (0.01 * max_val), c2 = (0.03 * max_val) * (0.03 * max_val);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

namespace {
std::string key_of(const std::string& id, const std::string& ds, const std::string& metric) {
  return ds + '\x1f' + metric + '\x1f' + id;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

void ScoreTable::add(ScoreRow row) {
  if (!std::isfinite(row.score)) throw std::invalid_argument("non-finite score for image " + row.image_id);
  if (row.image_id.empty() || row.dataset.empty() || row.metric.empty()) {
    throw std::invalid_argument("score rows need image_id, dataset and metric");
  }
  const std::string k = key_of(row.image_id, row.dataset, row.metric);
  if (index_.count(k)) {
    throw std::invalid_argument("duplicate score for (" + row.image_id + ", " + row.dataset + ", " + row.metric + ")");
  }
  index_.emplace(k, rows_.size());
  rows_.push_back(std::move(row));
}

std::vector<double> ScoreTable::scores(const std::string& dataset, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows_) {
    if (r.dataset == dataset && r.metric == metric) out.push_back(r.score);
  }
  return out;
}

std::vector<std::string> ScoreTable::images(const std::string& dataset) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rows_) {
    if (r.dataset == dataset && seen.insert(r.image_id).second) out.push_back(r.image_id);
  }
  return out;
}

std::vector<std::string> ScoreTable::datasets() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rows_) {
    if (seen.insert(r.dataset).second) out.push_back(r.dataset);
  }
  return out;
}

std::vector<std::string> ScoreTable::metrics() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rows_) {
    if (seen.insert(r.metric).second) out.push_back(r.metric);
  }
  return out;
}

double ScoreTable::at(const std::string& image_id, const std::string& dataset, const std::string& metric) const {
  auto it = index_.find(key_of(image_id, dataset, metric));
  if (it == index_.end()) {
    throw std::out_of_range("no " + metric + " score for image " + image_id + " in dataset " + dataset);
  }
  return rows_[it->second].score;
}

ScoreTable ScoreTable::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  ScoreTable t;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (!header) {
      if (f != std::vector<std::string>{"image_id", "dataset", "metric", "score"}) {
        throw std::invalid_argument("score CSV must start with header image_id,dataset,metric,score");
      }
      header = true;
      continue;
    }
    if (f.size() != 4) throw std::invalid_argument("score CSV line " + std::to_string(lineno) + ": expected 4 fields");
    double v;
    try {
      std::size_t used = 0;
      v = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("score CSV line " + std::to_string(lineno) + ": bad score '" + f[3] + "'");
    }
    t.add({f[0], f[1], f[2], v});
  }
  if (!header) throw std::invalid_argument("score CSV is empty");
  return t;
}

std::string ScoreTable::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "image_id,dataset,metric,score\n";
  for (const auto& r : rows_) os << r.image_id << ',' << r.dataset << ',' << r.metric << ',' << r.score << '\n';
  return os.str();
}

FailureCounts failure_counts(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("failure_counts: empty score list");
  double sum = 0.0;
  for (double x : scores) {
    if (!std::isfinite(x)) throw std::invalid_argument("failure_counts: non-finite score");
    sum += x;
  }
  FailureCounts c;
  c.n = scores.size();
  c.mu_g = sum / static_cast<double>(c.n);
  if (c.mu_g < 0.0) {
    throw std::domain_error("failure_counts: mean score is negative; the failure levels assume a positive metric");
  }
  const double t_poor = 0.9 * c.mu_g, t_collapse = 0.8 * c.mu_g;
  for (double x : scores) {
    if (x < c.mu_g) ++c.deficient;
    if (x < t_poor) ++c.poor;
    if (x < t_collapse) ++c.collapse;
  }
  return c;
}

MetricScales default_metric_scales() { return {{"musiq", 0.01}}; }

std::vector<CurveRow> sorted_curve(const ScoreTable& table, const std::string& dataset,
                                   const std::vector<std::string>& metrics, const MetricScales& scales) {
  if (metrics.empty()) throw std::invalid_argument("sorted_curve: no metrics given");
  std::vector<CurveRow> rows;
  for (const std::string& id : table.images(dataset)) {
    double acc = 0.0;
    for (const std::string& m : metrics) {
      auto it = scales.find(m);
      acc += table.at(id, dataset, m) * (it == scales.end() ? 1.0 : it->second);
    }
    rows.push_back({0, id, acc / static_cast<double>(metrics.size())});
  }
  if (rows.empty()) throw std::invalid_argument("sorted_curve: dataset '" + dataset + "' has no scores");
  std::stable_sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
    if (a.avg_score != b.avg_score) return a.avg_score > b.avg_score;
    return a.image_id < b.image_id;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

VarianceReport population_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("variance of an empty group");
  VarianceReport r;
  r.n = values.size();
  // Welford
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : values) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  r.mean = mean;
  r.variance = m2 / static_cast<double>(r.n);
  return r;
}

VarianceReport variance_report(const ScoreTable& table, const std::string& dataset, const std::string& metric) {
  const auto s = table.scores(dataset, metric);
  if (s.empty()) throw std::invalid_argument("no " + metric + " scores for dataset " + dataset);
  return population_stats(s);
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "rank,image_id,avg_score\n";
  for (const auto& r : rows) os << r.rank << ',' << r.image_id << ',' << r.avg_score << '\n';
  return os.str();
}

std::string curve_svg(const std::vector<CurveRow>& rows, const std::string& title) {
  const double W = 480, H = 320, pad = 40;
  double lo = 0.0, hi = 1.0;
  if (!rows.empty()) {
    lo = rows.back().avg_score;
    hi = rows.front().avg_score;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  const double n = static_cast<double>(std::max<std::size_t>(rows.size() - (rows.empty() ? 0 : 1), 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double x = pad + (W - 2 * pad) * static_cast<double>(i) / n;
    const double y = H - pad - (H - 2 * pad) * (rows[i].avg_score - lo) / (hi - lo);
    os << x << ',' << y << ' ';
  }
  os << "\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"" << H - 10 << "\" font-size=\"11\">rank</text>\n";
  os << "<text x=\"4\" y=\"" << pad - 6 << "\" font-size=\"11\">" << hi << "</text>\n";
  os << "<text x=\"4\" y=\"" << H - pad + 14 << "\" font-size=\"11\">" << lo << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string failure_report_csv(const std::vector<FailureReportRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "dataset,metric_set,mu_g,n,deficient,poor,collapse\n";
  for (const auto& r : rows) {
    os << r.dataset << ',' << r.metric_set << ',' << r.counts.mu_g << ',' << r.counts.n << ',' << r.counts.deficient
       << ',' << r.counts.poor << ',' << r.counts.collapse << '\n';
  }
  return os.str();
}

}  // namespace nsarm
