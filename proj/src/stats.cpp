#include "ncs/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

namespace ncs {

Summary summarize(const std::vector<double>& x, double level) {
  Summary s;
  s.n = static_cast<int>(x.size());
  if (s.n == 0) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double m = 0.0;
  for (double v : x) m += v;
  m /= s.n;
  s.mean = m;
  if (s.n < 2) {
    s.half_width = std::numeric_limits<double>::infinity();
    return s;
  }
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  s.sd = std::sqrt(ss / (s.n - 1));
  boost::math::students_t t(s.n - 1);
  const double q = boost::math::quantile(t, 0.5 + 0.5 * level);
  s.half_width = q * s.sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

bool overlaps(const Summary& a, const Summary& b) {
  return a.lo() <= b.hi() && b.lo() <= a.hi();
}

}  // namespace ncs
