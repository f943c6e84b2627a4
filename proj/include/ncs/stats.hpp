#ifndef NCS_STATS_HPP
#define NCS_STATS_HPP

#include <vector>

namespace ncs {

/// Sample mean with a two-sided Student-t confidence interval.
struct Summary {
  int n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double half_width = 0.0;  ///< 99% by default

  double lo() const { return mean - half_width; }
  double hi() const { return mean + half_width; }
};

Summary summarize(const std::vector<double>& x, double level = 0.99);

/// True when the two intervals share a point.
bool overlaps(const Summary& a, const Summary& b);

}  // namespace ncs

#endif  // NCS_STATS_HPP
