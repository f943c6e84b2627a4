#include "ncs/channel.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <iostream>
#include <limits>

namespace ncs {

ChannelSample make_channel_sample(const CMat& H) {
  ChannelSample s;
  s.H = H;
  const Eigen::Index Nt = H.cols();
  Eigen::SelfAdjointEigenSolver<CMat> es(H.adjoint() * H);
  // Ascending from Eigen; reverse with a stable tie-break on index.
  std::vector<Eigen::Index> order(Nt);
  for (Eigen::Index i = 0; i < Nt; ++i) order[i] = Nt - 1 - i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  s.U.resize(Nt, Nt);
  s.eigenvalues.resize(Nt);
  for (Eigen::Index k = 0; k < Nt; ++k) {
    CVec v = es.eigenvectors().col(order[k]);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const double mag = std::abs(v(imax));
    if (mag > 0.0) v *= std::conj(v(imax)) / mag;
    v(imax) = cd(v(imax).real(), 0.0);
    s.U.col(k) = v;
    s.eigenvalues(k) = es.eigenvalues()(order[k]);
  }
  s.sigma_star = std::max(0.0, s.eigenvalues(0));
  return s;
}

ChannelSample draw_channel(RngStream& rng, int Nt, int Nr) {
  if (Nt < 1 || Nr < 1) throw ParameterError("antenna counts must be >= 1");
  CMat H(Nr, Nt);
  for (int i = 0; i < Nr; ++i)
    for (int j = 0; j < Nt; ++j) H(i, j) = rng.complex_normal();
  return make_channel_sample(H);
}

namespace {

constexpr int kGaussOrder = 8;
using GL = boost::math::quadrature::gauss<double, kGaussOrder>;

// Nodes and weights of the 8-point Gauss–Legendre rule on [-1, 1].
std::vector<std::pair<double, double>> gl_rule() {
  std::vector<std::pair<double, double>> r;
  const auto& a = GL::abscissa();
  const auto& w = GL::weights();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      r.emplace_back(0.0, w[i]);
    } else {
      r.emplace_back(a[i], w[i]);
      r.emplace_back(-a[i], w[i]);
    }
  }
  return r;
}

// Determinant of a small dense matrix by partial-pivot LU.
double small_det(Mat T) {
  if (T.rows() == 0) return 1.0;
  return T.partialPivLu().determinant();
}

}  // namespace

SigmaStarDistribution::SigmaStarDistribution(int Nt, int Nr,
                                             std::uint64_t fallback_seed,
                                             std::size_t fallback_draws)
    : Nt_(Nt), Nr_(Nr) {
  if (Nt < 1 || Nr < 1) throw ParameterError("antenna counts must be >= 1");
  m_ = std::min(Nt, Nr);
  n_ = std::max(Nt, Nr);
  alpha_ = n_ - m_;
  closed_ = m_ <= 4;
  if (closed_) {
    // φ_i = sqrt((i-1)!/(i-1+α)!) L_{i-1}^{(α)}.
    for (int i = 1; i <= m_; ++i) {
      const int k = i - 1;
      Poly p;
      p.c.assign(k + 1, 0.0L);
      const long double norm = std::sqrt(
          static_cast<long double>(boost::math::factorial<double>(k)) /
          static_cast<long double>(boost::math::factorial<double>(k + alpha_)));
      for (int j = 0; j <= k; ++j) {
        const long double binom =
            boost::math::binomial_coefficient<double>(k + alpha_, k - j);
        const long double sign = (j % 2 == 0) ? 1.0L : -1.0L;
        p.c[j] = norm * sign * binom /
                 static_cast<long double>(boost::math::factorial<double>(j));
      }
      phi_.push_back(p);
    }
    prod_.assign(m_, std::vector<Poly>(m_));
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < m_; ++j) {
        Poly q;
        q.c.assign(phi_[i].c.size() + phi_[j].c.size() - 1, 0.0L);
        for (std::size_t a = 0; a < phi_[i].c.size(); ++a)
          for (std::size_t b = 0; b < phi_[j].c.size(); ++b)
            q.c[a + b] += phi_[i].c[a] * phi_[j].c[b];
        prod_[i][j] = q;
      }
  } else {
    std::clog << "ncs: closed-form sigma* CDF supports min(Nt,Nr) <= 4; "
                 "using an empirical CDF of "
              << fallback_draws << " draws\n";
    RngStream rng(fallback_seed);
    samples_.reserve(fallback_draws);
    for (std::size_t i = 0; i < fallback_draws; ++i)
      samples_.push_back(draw_channel(rng, Nt, Nr).sigma_star);
    std::sort(samples_.begin(), samples_.end());
  }
  build_tables();
}

double SigmaStarDistribution::gram(int i, int j, double x) const {
  // ∫₀^x Σ_p c_p t^{p+α} e^{-t} dt = Σ_p c_p Γ(p+α+1) P(p+α+1, x).
  const auto& c = prod_[i][j].c;
  long double acc = 0.0L;
  for (std::size_t p = 0; p < c.size(); ++p) {
    const double s = static_cast<double>(p + alpha_ + 1);
    acc += c[p] * static_cast<long double>(std::tgamma(s)) *
           static_cast<long double>(boost::math::gamma_p(s, x));
  }
  return static_cast<double>(acc);
}

double SigmaStarDistribution::gram_deriv(int i, int j, double x) const {
  const auto& c = prod_[i][j].c;
  long double poly = 0.0L;
  for (std::size_t p = c.size(); p-- > 0;) poly = poly * x + c[p];
  return static_cast<double>(poly * std::pow(static_cast<long double>(x), alpha_) *
                             std::exp(-static_cast<long double>(x)));
}

double SigmaStarDistribution::subset_sum(int k, double x, bool deriv) const {
  // Σ over k-subsets a of {0..m-1} of det T_a(x), or of its x-derivative.
  Mat T(m_, m_), D(m_, m_);
  for (int i = 0; i < m_; ++i)
    for (int j = 0; j < m_; ++j) {
      T(i, j) = gram(i, j, x);
      if (deriv) D(i, j) = gram_deriv(i, j, x);
    }
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << m_); ++mask) {
    if (std::popcount(mask) != k) continue;
    std::vector<int> idx;
    for (int i = 0; i < m_; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    Mat Ta(k, k), Da(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        Ta(a, b) = T(idx[a], idx[b]);
        if (deriv) Da(a, b) = D(idx[a], idx[b]);
      }
    if (!deriv) {
      total += small_det(Ta);
    } else {
      // d det = Σ_col det(T with that column replaced by its derivative).
      for (int c = 0; c < k; ++c) {
        Mat Tc = Ta;
        Tc.col(c) = Da.col(c);
        total += small_det(Tc);
      }
    }
  }
  return total;
}

double SigmaStarDistribution::order_cdf(int r, double x) const {
  if (!closed_) throw ParameterError("order_cdf needs the closed form");
  if (r < 1 || r > m_) throw ParameterError("order index out of range");
  if (!(x > 0.0)) return 0.0;
  double F = 0.0;
  for (int k = r; k <= m_; ++k) {
    const double sign = ((k - r) % 2 == 0) ? 1.0 : -1.0;
    F += sign * boost::math::binomial_coefficient<double>(k - 1, r - 1) *
         subset_sum(k, x, false);
  }
  return std::clamp(F, 0.0, 1.0);
}

double SigmaStarDistribution::cdf(double x) const {
  if (!(x > 0.0)) return 0.0;
  if (closed_) return order_cdf(m_, x);
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
  return static_cast<double>(it - samples_.begin()) /
         static_cast<double>(samples_.size());
}

double SigmaStarDistribution::pdf(double x) const {
  if (!closed_) throw ParameterError("pdf needs the closed form");
  if (!(x > 0.0)) return 0.0;
  // Only the k = m term survives for the largest eigenvalue.
  return std::max(0.0, subset_sum(m_, x, true));
}

double SigmaStarDistribution::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("quantile needs 0<p<1");
  if (!closed_) {
    const auto i = static_cast<std::size_t>(p * samples_.size());
    return samples_[std::min(i, samples_.size() - 1)];
  }
  double lo = 0.0, hi = 1.0;
  while (cdf(hi) < p) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void SigmaStarDistribution::build_tables() {
  if (closed_) {
    x_max_ = 8.0;
    while (1.0 - cdf(x_max_) > 1e-15) x_max_ *= 1.25;
    double err = 0.0;
    mean_ = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [this](double x) { return 1.0 - cdf(x); }, 0.0, x_max_, 12, 1e-12,
        &err);
    panels_ = 512;
    panel_w_ = x_max_ / panels_;
    const auto rule = gl_rule();
    for (int p = 0; p < panels_; ++p) {
      const double a = p * panel_w_;
      for (const auto& [t, w] : rule) {
        const double x = a + 0.5 * panel_w_ * (t + 1.0);
        node_x_.push_back(x);
        node_w_.push_back(0.5 * panel_w_ * w * pdf(x));
      }
    }
  } else {
    double s = 0.0;
    for (double v : samples_) s += v;
    mean_ = s / samples_.size();
    x_max_ = samples_.back();
    const std::size_t bins = 4096;
    const std::size_t per = samples_.size() / bins;
    for (std::size_t b = 0; b < bins; ++b) {
      node_x_.push_back(samples_[b * per + per / 2]);
      node_w_.push_back(1.0 / bins);
    }
  }
}

double SigmaStarDistribution::tail_expectation(
    const std::function<double(double)>& g, double threshold) const {
  if (!(threshold >= 0.0)) throw ParameterError("threshold must be >= 0");
  if (!closed_) {
    const auto it =
        std::upper_bound(samples_.begin(), samples_.end(), threshold);
    double s = 0.0;
    for (auto i = it; i != samples_.end(); ++i) s += g(*i);
    return s / samples_.size();
  }
  if (std::isinf(threshold)) return 0.0;
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          [&](double x) { return g(x) * pdf(x); }, threshold,
          std::numeric_limits<double>::infinity(), 15, 1e-12, &err);
  if (!std::isfinite(v)) throw NumericError("tail_expectation diverged");
  return v;
}

double SigmaStarDistribution::tail_sum(const std::function<double(double)>& g,
                                       double threshold) const {
  if (!(threshold >= 0.0)) throw ParameterError("threshold must be >= 0");
  if (!closed_) {
    double s = 0.0;
    for (std::size_t i = 0; i < node_x_.size(); ++i)
      if (node_x_[i] > threshold) s += node_w_[i] * g(node_x_[i]);
    return s;
  }
  if (threshold >= x_max_) return 0.0;
  const int p0 = static_cast<int>(threshold / panel_w_);
  double s = 0.0;
  const std::size_t per = node_x_.size() / panels_;
  for (std::size_t i = (p0 + 1) * per; i < node_x_.size(); ++i)
    s += node_w_[i] * g(node_x_[i]);
  const double a = threshold;
  const double b = std::min(x_max_, (p0 + 1) * panel_w_);
  if (b > a) {
    for (const auto& [t, w] : gl_rule()) {
      const double x = a + 0.5 * (b - a) * (t + 1.0);
      s += 0.5 * (b - a) * w * pdf(x) * g(x);
    }
  }
  return s;
}

}  // namespace ncs
