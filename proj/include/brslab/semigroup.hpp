#pragma once

// Growth bounds ||e^{At}|| <= M e^{lambda t} certified on a finite time grid.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "brslab/signal.hpp"

namespace brslab {

struct SemigroupGrowth {
  double M = 1.0;
  double lambda = 0.0;
  double t_cert = 0.0;
  int grid_points = 0;
};

inline double spectral_abscissa(const Mat& A) {
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

inline double operator_norm2(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()(0);
}

// lambda is the spectral abscissa; M is the largest ratio
// ||e^{At}|| e^{-lambda t} over t = 0 and a logarithmic grid of (0, t_cert].
inline SemigroupGrowth semigroup_growth(const Mat& A, double t_cert = 10.0, int n = 64) {
  if (A.rows() != A.cols()) throw std::invalid_argument("semigroup_growth: matrix must be square");
  if (!A.allFinite()) throw std::invalid_argument("semigroup_growth: non-finite matrix entry");
  if (!(t_cert > 0.0) || n < 2) throw std::invalid_argument("semigroup_growth: need t_cert > 0 and n >= 2");
  SemigroupGrowth g;
  g.lambda = spectral_abscissa(A);
  g.t_cert = t_cert;
  g.grid_points = n + 1;
  const double t_min = t_cert * 1e-6;
  const double ratio = std::log(t_cert / t_min);
  for (int i = 0; i < n; ++i) {
    const double t = t_min * std::exp(ratio * i / (n - 1));
    const Mat E = (A * t).exp();
    g.M = std::max(g.M, operator_norm2(E) * std::exp(-g.lambda * t));
  }
  return g;
}

}  // namespace brslab
