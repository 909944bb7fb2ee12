#include "onsager/lobpcg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace onsager {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

void project_columns(Mat& X) {
  for (int c = 0; c < X.cols(); ++c) X.col(c).array() -= X.col(c).mean();
}

Vec random_zero_sum(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  v.array() -= v.mean();
  return v;
}

// Modified Gram-Schmidt (two passes) against an optional orthonormal block;
// degenerate columns are replaced by random zero-sum vectors.
void orthonormalize(Mat& X, std::mt19937_64& rng, const Mat* against = nullptr) {
  const int n = static_cast<int>(X.rows());
  for (int attempt = 0; attempt < 8; ++attempt) {
    bool ok = true;
    for (int c = 0; c < X.cols(); ++c) {
      for (int pass = 0; pass < 2; ++pass) {
        if (against && against->cols() > 0)
          X.col(c).noalias() -= (*against) * (against->transpose() * X.col(c));
        for (int p = 0; p < c; ++p) X.col(c).noalias() -= X.col(p) * X.col(p).dot(X.col(c));
      }
      double nrm = X.col(c).norm();
      if (nrm < 1e-10) {
        X.col(c) = random_zero_sum(n, rng);
        ok = false;
      } else {
        X.col(c) /= nrm;
      }
    }
    if (ok) return;
  }
}

void fix_signs(Mat& X) {
  for (int c = 0; c < X.cols(); ++c) {
    for (int i = 0; i < X.rows(); ++i) {
      if (std::abs(X(i, c)) > 1e-8) {
        if (X(i, c) < 0) X.col(c) = -X.col(c);
        break;
      }
    }
  }
}

}  // namespace

LobpcgResult lobpcg_smallest(
    const std::function<void(const Eigen::MatrixXd&, Eigen::MatrixXd&)>& apply_op,
    const Eigen::VectorXd& precond_diag, const Eigen::MatrixXd& X0, int nev,
    const LobpcgOptions& opts) {
  const int n = static_cast<int>(precond_diag.size());
  std::mt19937_64 rng(opts.seed);
  int nb = std::max(nev, static_cast<int>(X0.cols()));
  nb = std::min(nb, n - 1);  // zero-sum subspace dimension
  LobpcgResult res;
  if (nev <= 0 || nev > n - 1) return res;

  Mat X(n, nb);
  for (int c = 0; c < nb; ++c) {
    if (c < X0.cols() && X0.col(c).norm() > 0)
      X.col(c) = X0.col(c);
    else
      X.col(c) = random_zero_sum(n, rng);
  }
  project_columns(X);
  orthonormalize(X, rng);

  Mat HX(n, nb), P, HP;
  apply_op(X, HX);
  Vec lambda(nb);
  for (int c = 0; c < nb; ++c) lambda[c] = X.col(c).dot(HX.col(c));
  Vec resnorm = Vec::Constant(nb, 1e300);

  auto tol_for = [&](double lam) { return opts.tol * std::max(std::abs(lam), opts.lambda_scale); };

  int it = 0;
  for (; it < opts.max_iters; ++it) {
    Mat R = HX - X * lambda.asDiagonal();
    for (int c = 0; c < nb; ++c) resnorm[c] = R.col(c).norm();
    bool done = true;
    for (int c = 0; c < nev; ++c)
      if (resnorm[c] > tol_for(lambda[c])) done = false;
    if (done) {
      res.converged = true;
      break;
    }

    Mat W = precond_diag.asDiagonal() * R;
    project_columns(W);
    orthonormalize(W, rng, &X);
    Mat HW(n, W.cols());
    apply_op(W, HW);

    const int px = nb, pw = static_cast<int>(W.cols()), pp = static_cast<int>(P.cols());
    Mat S(n, px + pw + pp), HS(n, px + pw + pp);
    S.leftCols(px) = X;
    HS.leftCols(px) = HX;
    S.middleCols(px, pw) = W;
    HS.middleCols(px, pw) = HW;
    if (pp > 0) {
      S.rightCols(pp) = P;
      HS.rightCols(pp) = HP;
    }

    Mat GA = S.transpose() * HS;
    GA = 0.5 * (GA + GA.transpose()).eval();
    Mat GB = S.transpose() * S;
    GB = 0.5 * (GB + GB.transpose()).eval();

    // whitening with rank truncation keeps the basis well conditioned
    Eigen::SelfAdjointEigenSolver<Mat> bsolve(GB);
    const Vec& d = bsolve.eigenvalues();
    double dmax = d.maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < d.size(); ++i)
      if (d[i] > 1e-12 * dmax) keep.push_back(i);
    Mat T(S.cols(), static_cast<Eigen::Index>(keep.size()));
    for (size_t i = 0; i < keep.size(); ++i)
      T.col(static_cast<Eigen::Index>(i)) =
          bsolve.eigenvectors().col(keep[i]) / std::sqrt(d[keep[i]]);

    Mat A = T.transpose() * GA * T;
    A = 0.5 * (A + A.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> asolve(A);
    const int m = std::min<int>(nb, static_cast<int>(A.rows()));
    Mat Y = T * asolve.eigenvectors().leftCols(m);

    Mat Xn = S * Y;
    Mat HXn = HS * Y;
    // implicit-difference block: contributions from W and P only
    Mat Yp = Y;
    Yp.topRows(px).setZero();
    Mat Pn = S * Yp;
    Mat HPn = HS * Yp;

    lambda = asolve.eigenvalues().head(m);
    X = Xn;
    HX = HXn;
    if (m < nb) {  // basis collapsed; refill
      int miss = nb - m;
      Mat fill(n, miss);
      for (int c = 0; c < miss; ++c) fill.col(c) = random_zero_sum(n, rng);
      orthonormalize(fill, rng, &X);
      Mat Hfill(n, miss);
      apply_op(fill, Hfill);
      X.conservativeResize(n, nb);
      HX.conservativeResize(n, nb);
      X.rightCols(miss) = fill;
      HX.rightCols(miss) = Hfill;
      lambda.conservativeResize(nb);
      for (int c = m; c < nb; ++c) lambda[c] = X.col(c).dot(HX.col(c));
    }

    // rescale the history block column by column (scaling commutes with the
    // operator); near-zero columns are dropped, rank issues are handled by the
    // whitening above
    int pk = 0;
    P.resize(n, Pn.cols());
    HP.resize(n, Pn.cols());
    for (int c = 0; c < Pn.cols(); ++c) {
      double nrm = Pn.col(c).norm();
      if (nrm < 1e-14) continue;
      P.col(pk) = Pn.col(c) / nrm;
      HP.col(pk) = HPn.col(c) / nrm;
      ++pk;
    }
    P.conservativeResize(n, pk);
    HP.conservativeResize(n, pk);
  }

  res.iterations = it;
  fix_signs(X);
  // re-pair eigenvectors with values after sign fix (values unchanged)
  res.lambda = lambda.head(std::min<int>(nev, static_cast<int>(lambda.size())));
  res.X = X.leftCols(res.lambda.size());
  res.residual_norms.resize(res.lambda.size());
  Mat HXf(n, res.X.cols());
  apply_op(res.X, HXf);
  for (int c = 0; c < res.X.cols(); ++c) {
    res.lambda[c] = res.X.col(c).dot(HXf.col(c));
    res.residual_norms[c] = (HXf.col(c) - res.lambda[c] * res.X.col(c)).norm();
  }
  if (!res.converged) {
    bool ok = true;
    for (int c = 0; c < res.lambda.size(); ++c)
      if (res.residual_norms[c] > tol_for(res.lambda[c])) ok = false;
    res.converged = ok;
  }
  return res;
}

}  // namespace onsager
