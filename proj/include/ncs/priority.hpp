#ifndef NCS_PRIORITY_HPP
#define NCS_PRIORITY_HPP

#include <string>
#include <vector>

#include "ncs/plant.hpp"
#include "ncs/types.hpp"

namespace ncs {

/// Where the high-urgency constant c is anchored.
enum class SigmaAnchor {
  Auto,          ///< Lyapunov if A is Schur stable, else ProcessNoise
  Lyapunov,      ///< stationary covariance of the dormant recursion
  ProcessNoise,  ///< Σ = W, the covariance right after a perfect reset
  Explicit,      ///< user-supplied matrix
};

SigmaAnchor parse_sigma_anchor(const std::string& s);
std::string to_string(SigmaAnchor a);

struct PriorityOptions {
  SigmaAnchor anchor = SigmaAnchor::Auto;
  Mat sigma_explicit;   ///< used with SigmaAnchor::Explicit
  Vec delta_direction;  ///< anchor direction for Δ; default (1,…,1)/√L
  double damping = 0.5;
  double tol = 1e-8;
  int max_iter = 500;
};

/// Closed-form data of the two-regime quadratic priority function.
///
/// In the eigenbasis Ã V = V diag(μ) (M = V⁻¹ in the M⁻¹ΓM notation), the
/// symmetric part X = Φ + Φᵀ has entries
///   X^M_kl = −2 s^M_kl / (conj(μ_k) + μ_l),  S^M = Vᴴ S V,
/// which reduces to −s_kk/μ_k on the diagonal and −2 s_kl/(μ_k+μ_l) off it
/// for real spectra. The Σ-affine part of Φ is skew and carries the rest of
/// S + XÃ, split between Σ_kk/w̃_kk and Σ_ll/w̃_ll as in the pairwise ODEs.
struct PriorityCoefficients {
  Mat A_tilde;
  Vec w_tilde;     ///< diagonal of the (whitened) W̃
  Mat S;
  CMat M_eig;      ///< right eigenvectors V, Ã V = V diag(mu)
  CVec mu;
  CMat S_M;        ///< Vᴴ S V
  Mat X1;          ///< Φ1 + Φ1ᵀ
  Mat K1;          ///< skew part carried by Σ in Φ1
  Mat Y;           ///< Aᵀ Y + Y A = 2 I; Φ2 + Φ2ᵀ = X1 + c σ̄ F̄ Y
  Mat KY;          ///< I − Y Ã, the c-slope of the skew part
  double sigma_bar = 0.0;
  double F_bar = 0.0;
  double lambda = 0.0;
  double eta_th = 0.0;
  double tau = 0.0;
  double c_star = 0.0;
  double c_residual = 0.0;
  int c_iterations = 0;
  std::string c_method;
  std::vector<double> c_roots;  ///< all positive roots found by the scan
  Mat Sigma_anchor;
  Vec Delta_anchor;

  int L() const { return static_cast<int>(A_tilde.rows()); }
  double shift() const { return c_star * sigma_bar * F_bar; }
  /// Φ_i + Φ_iᵀ for regime i ∈ {1, 2}.
  Mat sym(int regime) const;
  /// Weight matrix of the regime: S or S − cσ̄F̄ I.
  Mat weight(int regime) const;
};

/// Builds coefficients and solves f(Δ,Σ,c) = c ΔᵀΔ for c > 0.
/// `plant` must have a diagonal W̃ (whiten first).
PriorityCoefficients build_coefficients(const ContinuousPlant& plant,
                                        double tau, const Mat& S,
                                        double sigma_bar, double F_bar,
                                        double lambda, double eta_th,
                                        const PriorityOptions& opt = {});

/// f(Δ,Σ,c)/ΔᵀΔ − c at the anchor; zero at c_star.
double c_fixed_point_residual(const PriorityCoefficients& co, double c);

Mat phi1(const PriorityCoefficients& co, const Mat& Sigma);
Mat phi2(const PriorityCoefficients& co, const Mat& Sigma);
Mat phi(const PriorityCoefficients& co, int regime, const Mat& Sigma);

/// ∂Φ_i/∂Σ_jj of the closed form (constant, Φ is affine in Σ).
Mat phi_dsigma(const PriorityCoefficients& co, int regime, int j);

/// S_i + (Φ_i+Φ_iᵀ)Ã + Σ_j w̃_jj ∂Φ_i/∂Σ_jj from the closed form.
Mat phi_residual(const PriorityCoefficients& co, int regime,
                 const Mat& Sigma);

/// Regime used at Δ: 1 if ‖Δ‖ < η_th, else 2.
int regime_of(const PriorityCoefficients& co, const Vec& Delta);

/// ∇_Δ V ≈ (Φ_i + Φ_iᵀ)Δ.
Vec gradient(const PriorityCoefficients& co, const Vec& Delta,
             const Mat& Sigma);

struct ThresholdEvaluation {
  double nu_star = 0.0;
  Vec q1;
  Mat Xi;
};

/// Largest eigenvalue and unit eigenvector of x yᵀ + y xᵀ:
/// ν = yᵀx + ‖x‖‖y‖, q = (x/‖x‖ + y/‖y‖) normalized. Written as
/// ‖x‖‖y‖·‖x̂+ŷ‖²/2 to avoid cancellation. `fallback` is returned as q when
/// y = 0.
ThresholdEvaluation rank2_max_eig(const Vec& x, const Vec& y,
                                  const Vec& fallback);

/// x = Δ/τ, y = Σ ∇V, Ξ = x yᵀ.
ThresholdEvaluation threshold(const PriorityCoefficients& co,
                              const Vec& Delta, const Mat& Sigma, double tau);

/// Same with an externally supplied gradient (ADP baseline).
ThresholdEvaluation threshold_from_gradient(const Vec& Delta, const Vec& grad,
                                            const Mat& Sigma, double tau);

}  // namespace ncs

#endif  // NCS_PRIORITY_HPP
