#ifndef EWI_DAY_SERIES_HPP
#define EWI_DAY_SERIES_HPP

#include <Eigen/Core>
#include <cmath>
#include <limits>

namespace ewi {

// A scalar series indexed by integer day. Days are contiguous from
// first_day; NaN entries mark missing days inside the range.
struct DaySeries {
  int first_day = 0;
  Eigen::VectorXd values;

  int size() const { return static_cast<int>(values.size()); }
  int last_day() const { return first_day + size() - 1; }

  bool in_range(int day) const {
    return day >= first_day && day <= last_day();
  }

  // Value at `day`, NaN when outside the range or missing.
  double value_or_nan(int day) const {
    if (!in_range(day)) return std::numeric_limits<double>::quiet_NaN();
    return values(day - first_day);
  }

  bool has(int day) const { return std::isfinite(value_or_nan(day)); }

  static DaySeries constant(int first_day, int n, double v) {
    DaySeries s;
    s.first_day = first_day;
    s.values = Eigen::VectorXd::Constant(n, v);
    return s;
  }
};

}  // namespace ewi

#endif  // EWI_DAY_SERIES_HPP
