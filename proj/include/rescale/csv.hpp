#ifndef RESCALE_CSV_HPP
#define RESCALE_CSV_HPP

#include "rescale/trace.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

namespace rescale {

/// Decimal text with 17 significant digits; "nan", "inf", "-inf" for non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Comma-separated rows under a fixed header. Fields are never quoted, so
/// string fields must not contain commas or newlines.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), width_(header.size()) {
    write_fields(header);
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    static_assert(sizeof...(Fields) > 0);
    std::vector<std::string> text{to_field(fields)...};
    if (text.size() != width_) throw Error(ErrorKind::InvalidArgument, "CSV row width differs from header");
    write_fields(text);
  }

  void row_fields(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw Error(ErrorKind::InvalidArgument, "CSV row width differs from header");
    write_fields(fields);
  }

  template <typename T>
  static std::string to_field(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_convertible_v<T, const char*>) {
      return std::string(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      return v ? "1" : "0";
    } else if constexpr (std::is_integral_v<T>) {
      return std::to_string(v);
    } else {
      return format_number(static_cast<double>(v));
    }
  }

 private:
  void write_fields(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::ostream& out_;
  std::size_t width_;
};

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {"k",          "step_norm",  "statistic", "cosine",
                                                "log_det",    "lambda_max", "lambda_min", "gamma",
                                                "objective",  "gap",        "accepted"};
  return cols;
}

inline void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  CsvWriter csv(out, trace_columns());
  for (const auto& r : trace.rows)
    csv.row(r.k, r.step_norm, r.statistic, r.cosine, r.log_det, r.lambda_max, r.lambda_min, r.gamma,
            r.objective, r.gap, r.accepted);
}

namespace detail {

inline nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace detail

/// The trace as JSON; non-finite numbers become null.
inline nlohmann::json trace_to_json(const RunTrace& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : trace.rows) {
    rows.push_back({{"k", r.k},
                    {"step_norm", detail::number_json(r.step_norm)},
                    {"statistic", detail::number_json(r.statistic)},
                    {"cosine", detail::number_json(r.cosine)},
                    {"log_det", detail::number_json(r.log_det)},
                    {"lambda_max", detail::number_json(r.lambda_max)},
                    {"lambda_min", detail::number_json(r.lambda_min)},
                    {"gamma", detail::number_json(r.gamma)},
                    {"objective", detail::number_json(r.objective)},
                    {"gap", detail::number_json(r.gap)},
                    {"accepted", r.accepted}});
  }
  nlohmann::json normal = nlohmann::json::array();
  for (Index i = 0; i < trace.outcome.normal.size(); ++i) normal.push_back(trace.outcome.normal(i));
  return {{"outcome",
           {{"kind", to_string(trace.outcome.kind)},
            {"normal", normal},
            {"certificate_margin", detail::number_json(trace.outcome.certificate_margin)},
            {"detail", trace.outcome.detail}}},
          {"iterations", trace.iterations()},
          {"rows", rows}};
}

}  // namespace rescale

#endif  // RESCALE_CSV_HPP
