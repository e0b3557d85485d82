#ifndef RESCALE_ANALYTICS_HPP
#define RESCALE_ANALYTICS_HPP

#include "rescale/trace.hpp"
#include "rescale/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace rescale {

/// Sample autocorrelation at a lag (mean removed, normalized by lag-0 sum of squares).
inline double autocorrelation(const std::vector<double>& series, std::size_t lag) {
  const std::size_t n = series.size();
  if (lag >= n) return kNaN;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) return kNaN;
  double num = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) num += (series[t] - mean) * (series[t + lag] - mean);
  return num / denom;
}

struct CycleReport {
  std::size_t period = 0;        // 0 when no lag reaches the threshold
  double autocorrelation = kNaN;  // at the detected period
  double drift = kNaN;            // max |x_{t+P} - x_t| over the series
};

/// Smallest lag in [1, max_period] whose autocorrelation exceeds threshold.
inline CycleReport detect_cycle(const std::vector<double>& series, std::size_t max_period = 20,
                                double threshold = 0.99) {
  CycleReport out;
  for (std::size_t lag = 1; lag <= max_period && lag < series.size(); ++lag) {
    const double r = autocorrelation(series, lag);
    if (r > threshold) {
      out.period = lag;
      out.autocorrelation = r;
      break;
    }
  }
  if (out.period > 0) {
    double drift = 0.0;
    for (std::size_t t = 0; t + out.period < series.size(); ++t)
      drift = std::max(drift, std::abs(series[t + out.period] - series[t]));
    out.drift = drift;
  }
  return out;
}

struct LinearFit {
  double slope = kNaN;
  double intercept = kNaN;
  double r2 = kNaN;
  std::size_t points = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit fit;
  const std::size_t n = std::min(x.size(), y.size());
  fit.points = n;
  if (n < 2) return fit;
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

/// Slope of log(y) against log(x).
inline LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return linear_fit(lx, ly);
}

/**
 * Fit of log(f - f*) against iteration over the iterates reached by
 * accepted steps, starting with the first descent. Row k holds f(x_k);
 * an accepted pass k contributes the point (k + 1, gap of row k + 1).
 */
inline LinearFit gap_rate_fit(const RunTrace& trace) {
  std::vector<double> ks;
  std::vector<double> logs;
  for (std::size_t k = 0; k + 1 < trace.rows.size(); ++k) {
    if (trace.rows[k].accepted != 1) continue;
    const double gap = trace.rows[k + 1].gap;
    if (gap > 0.0 && std::isfinite(gap)) {
      ks.push_back(static_cast<double>(k + 1));
      logs.push_back(std::log(gap));
    }
  }
  return linear_fit(ks, logs);
}

/// Number of maximal runs of consecutive rejected passes.
inline std::size_t flat_segments(const RunTrace& trace) {
  std::size_t count = 0;
  bool in_flat = false;
  for (const auto& row : trace.rows) {
    if (row.accepted == 0 && !in_flat) ++count;
    in_flat = row.accepted == 0;
  }
  return count;
}

/// First row index with step_norm <= factor * step_norm of row 0.
inline std::optional<std::size_t> first_step_reduced(const RunTrace& trace, double factor) {
  if (trace.rows.empty()) return std::nullopt;
  const double target = factor * trace.rows.front().step_norm;
  for (std::size_t k = 0; k < trace.rows.size(); ++k)
    if (trace.rows[k].step_norm <= target) return k;
  return std::nullopt;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace rescale

#endif  // RESCALE_ANALYTICS_HPP
