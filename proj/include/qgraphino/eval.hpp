#pragma once

// Forecast skill. The all-season correlation skill is the mean, over target calendar
// months, of the Pearson correlation between predicted and observed index values.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgraphino/error.hpp"

namespace qgraphino::eval {

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) detail::fail(ErrorCode::LengthMismatch, "pearson: series lengths differ");
  if (x.size() < 2) detail::fail(ErrorCode::DegenerateSeries, "pearson: need at least 2 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  // centred sum of squares at rounding level means the series is constant
  constexpr double kRelEps = 1e-24;
  if (!(sxx > kRelEps * xx) || !(syy > kRelEps * yy)) {
    detail::fail(ErrorCode::DegenerateSeries, "pearson: zero-variance series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct SkillReport {
  std::array<double, 12> per_month_r{};    // NaN where undefined
  std::array<bool, 12> month_defined{};
  std::array<int, 12> n_per_month{};
  double all_season_skill = std::numeric_limits<double>::quiet_NaN();
  double mse = 0.0;
  int months_used = 0;
  bool coverage_warning = false;  // fewer than 12 months contributed to the mean
};

/// Groups by target month (1..12), correlates within each group, averages the defined
/// months. Months with < 2 samples or zero variance are excluded and flagged.
inline SkillReport all_season_skill(std::span<const double> preds, std::span<const double> targets,
                                    std::span<const int> target_months) {
  if (preds.size() != targets.size() || preds.size() != target_months.size()) {
    detail::fail(ErrorCode::LengthMismatch, "predictions, targets and months must align");
  }
  SkillReport rep;
  rep.per_month_r.fill(std::numeric_limits<double>::quiet_NaN());
  std::array<std::vector<double>, 12> p, t;
  double se = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int m = target_months[i];
    if (m < 1 || m > 12) detail::fail(ErrorCode::InvalidArgument, "target month outside 1..12");
    p[m - 1].push_back(preds[i]);
    t[m - 1].push_back(targets[i]);
    se += (preds[i] - targets[i]) * (preds[i] - targets[i]);
  }
  rep.mse = preds.empty() ? 0.0 : se / static_cast<double>(preds.size());

  double sum = 0.0;
  for (int m = 0; m < 12; ++m) {
    rep.n_per_month[m] = static_cast<int>(p[m].size());
    if (p[m].size() < 2) continue;
    try {
      rep.per_month_r[m] = pearson(p[m], t[m]);
      rep.month_defined[m] = true;
      sum += rep.per_month_r[m];
      ++rep.months_used;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateSeries) throw;
    }
  }
  rep.coverage_warning = rep.months_used < 12;
  if (rep.months_used > 0) rep.all_season_skill = sum / rep.months_used;
  return rep;
}

inline nlohmann::json to_json(const SkillReport& r, int lead_h) {
  nlohmann::json months = nlohmann::json::array();
  for (int m = 0; m < 12; ++m) {
    months.push_back({{"month", m + 1},
                      {"r", r.month_defined[m] ? nlohmann::json(r.per_month_r[m]) : nlohmann::json(nullptr)},
                      {"n", r.n_per_month[m]}});
  }
  return {{"lead_h", lead_h},
          {"all_season_skill", std::isfinite(r.all_season_skill) ? nlohmann::json(r.all_season_skill) : nlohmann::json(nullptr)},
          {"mse", r.mse},
          {"months_used", r.months_used},
          {"coverage_warning", r.coverage_warning},
          {"per_month", std::move(months)}};
}

inline std::string csv_header() {
  return "lead_h,skill,mse,r_jan,r_feb,r_mar,r_apr,r_may,r_jun,r_jul,r_aug,r_sep,r_oct,r_nov,r_dec";
}

/// `lead_h,skill,mse,r_jan..r_dec`; undefined entries are written as NaN.
inline std::string csv_line(const SkillReport& r, int lead_h) {
  std::ostringstream os;
  os.precision(17);
  os << lead_h << ',' << r.all_season_skill << ',' << r.mse;
  for (int m = 0; m < 12; ++m) os << ',' << r.per_month_r[m];
  std::string s = os.str();
  // iostreams print quiet NaN as "nan" or "-nan" depending on sign bit
  for (std::size_t pos; (pos = s.find("-nan")) != std::string::npos;) s.replace(pos, 4, "NaN");
  for (std::size_t pos; (pos = s.find("nan")) != std::string::npos;) s.replace(pos, 3, "NaN");
  return s;
}

}  // namespace qgraphino::eval
