#include "ncs/plant.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "ncs/linalg.hpp"

namespace ncs {

Mat expm(const Mat& A) { return A.exp(); }

double spectral_radius(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double min_sym_eig(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(A), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Mat dlyap(const Mat& A, const Mat& W) {
  const Eigen::Index n = A.rows();
  if (spectral_radius(A) >= 1.0) {
    throw NumericError("dlyap: A is not Schur stable");
  }
  Mat I = Mat::Identity(n * n, n * n);
  Mat K = I - Eigen::kroneckerProduct(A, A).eval();
  Vec w = Eigen::Map<const Vec>(W.data(), n * n);
  Vec p = K.partialPivLu().solve(w);
  return symmetrize(Eigen::Map<Mat>(p.data(), n, n));
}

Mat clyap(const Mat& A, const Mat& C) {
  const Eigen::Index n = A.rows();
  Mat I = Mat::Identity(n, n);
  // vec(AᵀX + XA) = (I⊗Aᵀ + Aᵀ⊗I) vec(X)
  Mat K = Eigen::kroneckerProduct(I, A.transpose()).eval() +
          Eigen::kroneckerProduct(A.transpose(), I).eval();
  Vec c = -Eigen::Map<const Vec>(C.data(), n * n);
  Eigen::FullPivLU<Mat> lu(K);
  if (!lu.isInvertible()) {
    throw NumericError("clyap: singular Lyapunov operator");
  }
  Vec x = lu.solve(c);
  return Eigen::Map<Mat>(x.data(), n, n);
}

void ContinuousPlant::validate() const {
  const auto n = A_tilde.rows();
  if (n == 0 || A_tilde.cols() != n) {
    throw ParameterError("A_tilde must be square and nonempty");
  }
  if (B_tilde.rows() != n || B_tilde.cols() == 0) {
    throw ParameterError("B_tilde must have L rows");
  }
  if (W_tilde.rows() != n || W_tilde.cols() != n) {
    throw ParameterError("W_tilde must be L×L");
  }
  if (!A_tilde.allFinite() || !B_tilde.allFinite() || !W_tilde.allFinite()) {
    throw ParameterError("plant matrices must be finite");
  }
}

WhitenResult whiten(const ContinuousPlant& plant) {
  plant.validate();
  const Mat& W = plant.W_tilde;
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidCovarianceError("W_tilde is not symmetric");
  }
  const int L = plant.L();
  WhitenResult out;
  Mat offdiag = W;
  offdiag.diagonal().setZero();
  if (offdiag.cwiseAbs().maxCoeff() == 0.0) {
    if (W.diagonal().minCoeff() < 0.0) {
      throw InvalidCovarianceError("W_tilde has a negative variance");
    }
    out.plant = plant;
    out.M = Mat::Identity(L, L);
    out.T = W.diagonal();
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(W);
  if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw InvalidCovarianceError("W_tilde is indefinite");
  }
  // Eigen returns ascending order; rows of M are eigenvectors, descending.
  Mat M(L, L);
  Vec T(L);
  for (int i = 0; i < L; ++i) {
    M.row(i) = es.eigenvectors().col(L - 1 - i).transpose();
    T(i) = std::max(0.0, es.eigenvalues()(L - 1 - i));
  }
  out.M = M;
  out.T = T;
  out.plant.A_tilde = M * plant.A_tilde * M.transpose();
  out.plant.B_tilde = M * plant.B_tilde;
  out.plant.W_tilde = T.asDiagonal();
  return out;
}

DiscretePlant discretize(const ContinuousPlant& plant, double tau) {
  plant.validate();
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const int L = plant.L();
  const int M = plant.M();
  DiscretePlant d;
  d.tau = tau;

  // [[Ã, B̃], [0, 0]]τ exponentiates to [[A, B], [0, I]].
  Mat Cb = Mat::Zero(L + M, L + M);
  Cb.topLeftCorner(L, L) = plant.A_tilde * tau;
  Cb.topRightCorner(L, M) = plant.B_tilde * tau;
  Mat Eb = expm(Cb);
  d.A = Eb.topLeftCorner(L, L);
  d.B = Eb.topRightCorner(L, M);

  // Van Loan: exp([[-Ã, W̃], [0, Ãᵀ]]τ) = [[·, F12], [0, F22]], W = F22ᵀ F12.
  Mat Cw = Mat::Zero(2 * L, 2 * L);
  Cw.topLeftCorner(L, L) = -plant.A_tilde * tau;
  Cw.topRightCorner(L, L) = plant.W_tilde * tau;
  Cw.bottomRightCorner(L, L) = plant.A_tilde.transpose() * tau;
  Mat Ew = expm(Cw);
  d.W = symmetrize(Ew.bottomRightCorner(L, L).transpose() *
                   Ew.topRightCorner(L, L));
  return d;
}

bool is_controllable(const Mat& A, const Mat& B) {
  const auto L = A.rows();
  const auto M = B.cols();
  Mat C(L, L * M);
  Mat blk = B;
  for (Eigen::Index k = 0; k < L; ++k) {
    C.middleCols(k * M, M) = blk;
    blk = A * blk;
  }
  Eigen::ColPivHouseholderQR<Mat> qr(C);
  qr.setThreshold(1e-10);
  return qr.rank() == L;
}

namespace {

Mat riccati_step(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                 const Mat& Z) {
  Mat G = B.transpose() * Z * B + R;
  Mat BtZA = B.transpose() * Z * A;
  Eigen::LDLT<Mat> ldlt(G);
  return symmetrize(A.transpose() * Z * A -
                    BtZA.transpose() * ldlt.solve(BtZA) + Q);
}

}  // namespace

CEControllerGain solve_dare(const DiscretePlant& disc, const Mat& Q,
                            const Mat& R, const DareOptions& opt) {
  const int L = disc.L();
  const int M = disc.M();
  if (Q.rows() != L || Q.cols() != L || R.rows() != M || R.cols() != M) {
    throw ParameterError("solve_dare: Q must be L×L and R M×M");
  }
  if (min_sym_eig(Q) < -1e-12) throw ParameterError("Q must be PSD");
  if (min_sym_eig(R) <= 0.0) throw ParameterError("R must be PD");

  CEControllerGain g;
  g.Q = Q;
  g.R = R;
  Mat Z = Q;
  for (int k = 1; k <= opt.max_iter; ++k) {
    Mat Zn = riccati_step(disc.A, disc.B, Q, R, Z);
    if (!Zn.allFinite()) {
      throw NumericError("solve_dare: Riccati recursion is not finite");
    }
    const double dz = (Zn - Z).norm();
    Z = Zn;
    if (dz <= opt.tol * std::max(Z.norm(), 1e-300)) {
      g.iterations = k;
      break;
    }
    if (k == opt.max_iter) {
      throw ConvergenceError(
          "solve_dare: Riccati recursion did not converge in " +
          std::to_string(opt.max_iter) + " iterations (last step " +
          std::to_string(dz) + ")");
    }
  }
  Mat G = disc.B.transpose() * Z * disc.B + R;
  Eigen::FullPivLU<Mat> lu(G);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw NumericError("solve_dare: BᵀZB + R is singular");
  }
  g.Z = Z;
  g.Psi = -lu.solve(disc.B.transpose() * Z * disc.A);
  const double rho = spectral_radius(disc.A + disc.B * g.Psi);
  if (!(rho < 1.0)) {
    throw NumericError("solve_dare: closed loop is not stable (rho = " +
                       std::to_string(rho) + ")");
  }
  return g;
}

double dare_residual(const DiscretePlant& disc, const CEControllerGain& g) {
  return (g.Z - riccati_step(disc.A, disc.B, g.Q, g.R, g.Z)).norm();
}

Vec step_plant(const Vec& x, const Vec& u, const Vec& w,
               const DiscretePlant& disc) {
  if (x.size() != disc.L() || w.size() != disc.L() || u.size() != disc.M()) {
    throw ParameterError("step_plant: dimension mismatch");
  }
  return disc.A * x + disc.B * u + w;
}

}  // namespace ncs
