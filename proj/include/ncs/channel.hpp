#ifndef NCS_CHANNEL_HPP
#define NCS_CHANNEL_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "ncs/rng.hpp"
#include "ncs/types.hpp"

namespace ncs {

/// One channel realization with the eigendecomposition HᴴH = U Π Uᴴ.
struct ChannelSample {
  CMat H;            ///< N_r×N_t
  CMat U;            ///< N_t×N_t unitary, columns ordered as `eigenvalues`
  Vec eigenvalues;   ///< descending
  double sigma_star = 0.0;

  /// Top eigenvector of HᴴH, largest-magnitude entry real and positive.
  CVec u1() const { return U.col(0); }
};

/// Decomposes a given H. Column phases of U are fixed so that the
/// largest-magnitude entry of each column is real and positive.
ChannelSample make_channel_sample(const CMat& H);

/// i.i.d. CN(0,1) entries, drawn row-major.
ChannelSample draw_channel(RngStream& rng, int Nt, int Nr);

/// Law of σ*, the largest eigenvalue of HᴴH for i.i.d. CN(0,1) H.
///
/// With m = min(N_t,N_r), n = max(N_t,N_r) and the orthonormal Laguerre
/// functions φ_i of weight t^{n-m}e^{-t}, the CDF of the r-th smallest
/// nonzero eigenvalue is
///   F_r(x) = Σ_{k=r}^{m} (-1)^{k-r} C(k-1, r-1) Σ_{|a|=k} det T_a(x),
///   T_a(i,j) = ∫₀^x φ_{a_i} φ_{a_j} t^{n-m} e^{-t} dt.
/// σ* is r = m. Closed form for m ≤ 4; larger arrays fall back to an
/// empirical CDF of cached Monte Carlo draws.
class SigmaStarDistribution {
 public:
  SigmaStarDistribution(int Nt, int Nr, std::uint64_t fallback_seed = 7,
                        std::size_t fallback_draws = 1000000);

  int Nt() const { return Nt_; }
  int Nr() const { return Nr_; }
  int d() const { return m_; }
  bool closed_form() const { return closed_; }

  double cdf(double x) const;
  double pdf(double x) const;  ///< exact derivative of cdf (closed form only)

  /// CDF of the r-th smallest of the m nonzero eigenvalues (closed form).
  double order_cdf(int r, double x) const;

  /// σ̄ = ∫₀^∞ (1 − F(x)) dx.
  double mean() const { return mean_; }

  double quantile(double p) const;

  /// ∫_{threshold}^∞ g(x) dF(x).
  double tail_expectation(const std::function<double(double)>& g,
                          double threshold) const;

  /// Same integral on a cached node table; cheap enough for inner loops.
  double tail_sum(const std::function<double(double)>& g,
                  double threshold) const;

  /// Upper end of the node table, 1 − F(x_max) < 1e-15.
  double x_max() const { return x_max_; }

 private:
  struct Poly {
    std::vector<long double> c;
  };
  double gram(int i, int j, double x) const;
  double gram_deriv(int i, int j, double x) const;
  double subset_sum(int k, double x, bool deriv) const;
  void build_tables();

  int Nt_, Nr_, m_, n_, alpha_;
  bool closed_ = true;
  std::vector<Poly> phi_;                  // φ_1..φ_m
  std::vector<std::vector<Poly>> prod_;    // φ_iφ_j coefficients
  std::vector<double> samples_;            // sorted, fallback only
  double mean_ = 0.0;
  double x_max_ = 0.0;
  int panels_ = 0;
  double panel_w_ = 0.0;
  std::vector<double> node_x_, node_w_;    // GL nodes, weights × pdf
};

}  // namespace ncs

#endif  // NCS_CHANNEL_HPP
