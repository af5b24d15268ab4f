#include "qmor/dense.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qmor {

ThinSvd thin_svd(const Matrix& a) {
  if (a.size() == 0) throw InvalidArgument("zero matrix has no thin SVD");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double sigma_max = sv.size() ? sv(0) : 0.0;
  if (!(sigma_max > 0.0)) throw InvalidArgument("zero matrix has no thin SVD");

  const double cut = static_cast<double>(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon() * sigma_max;
  Index k = 0;
  while (k < sv.size() && sv(k) > cut) ++k;

  ThinSvd out;
  out.left_vectors = svd.matrixU().leftCols(k);
  out.singular_values = sv.head(k);
  out.right_vectors = svd.matrixV().leftCols(k);
  return out;
}

Vector tikhonov_row_solve(const ThinSvd& svd, const Vector& rhs, double alpha) {
  if (alpha < 0.0) throw InvalidArgument("negative regularization");
  if (rhs.size() != svd.right_vectors.rows())
    throw InvalidArgument("tikhonov_row_solve: rhs length does not match the factorization");
  // beta_l = y_l . rhs, then scale each spectral coefficient by the filter
  // factor sigma^2/(sigma^2 + alpha^2) over sigma.
  Vector coeff = svd.right_vectors.transpose() * rhs;
  for (Index l = 0; l < coeff.size(); ++l) {
    const double s = svd.singular_values(l);
    coeff(l) *= s / (s * s + alpha * alpha);
  }
  return svd.left_vectors * coeff;
}

double gcv_score(const ThinSvd& svd, const Vector& rhs, double alpha) {
  if (rhs.size() != svd.right_vectors.rows())
    throw InvalidArgument("gcv_score: rhs length does not match the factorization");
  const Index ns = rhs.size();
  Vector beta = svd.right_vectors.transpose() * rhs;
  // rho^2: part of rhs outside the row space of the feature matrix.
  double rho2 = rhs.squaredNorm() - beta.squaredNorm();
  rho2 = std::max(rho2, 0.0);

  double numer = rho2;
  double trace = 0.0;
  for (Index l = 0; l < beta.size(); ++l) {
    const double s2 = svd.singular_values(l) * svd.singular_values(l);
    const double f = s2 / (s2 + alpha * alpha);
    const double miss = (1.0 - f) * beta(l);
    numer += miss * miss;
    trace += f;
  }
  const double denom = static_cast<double>(ns) - trace;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return numer / (denom * denom);
}

Vector NnlsSolution::dense() const {
  Vector x = Vector::Zero(size);
  for (const auto& [j, w] : weights) x(j) = w;
  return x;
}

namespace {

NnlsSolution pack_solution(const Vector& x, const Matrix& c, const Vector& d,
                           int passes) {
  NnlsSolution out;
  out.size = x.size();
  for (Index j = 0; j < x.size(); ++j)
    if (x(j) > 0.0) out.weights.emplace_back(j, x(j));
  out.residual_norm = (c * x - d).norm();
  out.iterations = passes;
  return out;
}

}  // namespace

NnlsSolution nnls_early_stop(const Matrix& c, const Vector& d, double tau,
                             int max_passes) {
  if (c.rows() != d.size())
    throw InvalidArgument("nnls_early_stop: row count of C does not match d");
  if (!(tau > 0.0) || tau > 1.0)
    throw InvalidArgument("nnls_early_stop: tau must lie in (0, 1]");
  const double dnorm = d.norm();
  if (!(dnorm > 0.0))
    throw InvalidArgument("nnls_early_stop: zero right-hand side");

  const Index ne = c.cols();
  if (max_passes <= 0) max_passes = static_cast<int>(10 * ne);
  const double target = tau * dnorm;

  Vector x = Vector::Zero(ne);
  std::vector<Index> passive;                 // active (positive) column set
  std::vector<char> in_passive(static_cast<size_t>(ne), 0);
  Vector residual = d;                        // d - C x
  double best_norm = dnorm;
  Vector best_x = x;
  int passes = 0;

  // Least-squares fit restricted to the passive columns.
  const auto passive_fit = [&](Vector& z) {
    Matrix cp(c.rows(), static_cast<Index>(passive.size()));
    for (size_t k = 0; k < passive.size(); ++k) cp.col(static_cast<Index>(k)) = c.col(passive[k]);
    z = cp.colPivHouseholderQr().solve(d);
  };

  while (true) {
    const double rnorm = residual.norm();
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best_x = x;
    }
    if (rnorm <= target) return pack_solution(x, c, d, passes);

    // Pick the most promising inactive column by gradient.
    Vector w = c.transpose() * residual;
    Index pick = -1;
    double wmax = 0.0;
    for (Index j = 0; j < ne; ++j) {
      if (in_passive[static_cast<size_t>(j)]) continue;
      if (w(j) > wmax) {
        wmax = w(j);
        pick = j;
      }
    }
    if (pick < 0) {
      std::ostringstream msg;
      msg << "nnls_early_stop: stalled at relative residual " << (best_norm / dnorm)
          << " above tau = " << tau;
      throw NnlsFailure(msg.str(), pack_solution(best_x, c, d, passes));
    }
    if (++passes > max_passes) {
      std::ostringstream msg;
      msg << "nnls_early_stop: pass cap " << max_passes
          << " reached at relative residual " << (best_norm / dnorm);
      throw NnlsFailure(msg.str(), pack_solution(best_x, c, d, passes));
    }
    passive.push_back(pick);
    in_passive[static_cast<size_t>(pick)] = 1;

    // Inner loop: restore feasibility of the passive-set least-squares fit.
    Vector z;
    passive_fit(z);
    while (true) {
      bool feasible = true;
      double theta = 1.0;
      for (size_t k = 0; k < passive.size(); ++k) {
        if (z(static_cast<Index>(k)) > 0.0) continue;
        feasible = false;
        const double xk = x(passive[k]);
        const double step = xk / (xk - z(static_cast<Index>(k)));
        theta = std::min(theta, step);
      }
      if (feasible) break;
      // Move to the boundary and drop columns pinned at zero.
      for (size_t k = 0; k < passive.size(); ++k) {
        const Index j = passive[k];
        x(j) += theta * (z(static_cast<Index>(k)) - x(j));
      }
      double xmax = 0.0;
      for (const Index j : passive) xmax = std::max(xmax, x(j));
      std::vector<Index> kept;
      for (const Index j : passive) {
        if (x(j) > 1e-12 * xmax) {
          kept.push_back(j);
        } else {
          x(j) = 0.0;
          in_passive[static_cast<size_t>(j)] = 0;
        }
      }
      passive = std::move(kept);
      if (passive.empty()) break;
      passive_fit(z);
    }
    x.setZero();
    for (size_t k = 0; k < passive.size(); ++k) x(passive[k]) = z(static_cast<Index>(k));
    residual = d - c * x;
  }
}

}  // namespace qmor
