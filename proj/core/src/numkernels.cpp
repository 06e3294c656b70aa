#include "taskfactor/numkernels.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace taskfactor::num {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite entries");
}

double orient(Eigen::Ref<Vector> vec) {
  if (vec.size() == 0) return 1.0;
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < vec.size(); ++i) {
    if (std::abs(vec(i)) > best) {
      best = std::abs(vec(i));
      arg = i;
    }
  }
  if (vec(arg) < 0.0) {
    vec = -vec;
    return -1.0;
  }
  return 1.0;
}

EigenResult sym_eig(const Matrix& m) {
  if (m.rows() != m.cols()) throw InputError("sym_eig: matrix is not square");
  require_finite(m, "sym_eig");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw InputError("sym_eig: matrix is not symmetric");
  }
  const Eigen::Index n = m.rows();
  EigenResult out;
  if (n == 0) return out;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericError("sym_eig: eigensolver did not converge");
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    orient(out.vectors.col(i));
  }
  return out;
}

SvdResult truncated_svd(const Matrix& m, Eigen::Index rank) {
  const Eigen::Index limit = std::min(m.rows(), m.cols());
  if (rank < 1 || rank > limit) {
    throw InputError("truncated_svd: rank " + std::to_string(rank) + " outside [1, " + std::to_string(limit) + "]");
  }
  require_finite(m, "truncated_svd");

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.sigma = svd.singularValues().head(rank);
  out.u = svd.matrixU().leftCols(rank);
  out.v = svd.matrixV().leftCols(rank);
  for (Eigen::Index k = 0; k < rank; ++k) {
    const double sign = orient(out.v.col(k));
    out.u.col(k) *= sign;
  }
  return out;
}

ColumnMoments column_moments(const Matrix& x) {
  ColumnMoments mom;
  const auto n = static_cast<double>(x.rows());
  mom.mean = x.colwise().mean().transpose();
  mom.sd.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - mom.mean(j)).square().sum();
    mom.sd(j) = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return mom;
}

Matrix covariance_matrix(const Matrix& x) {
  if (x.rows() < 2) throw InputError("covariance: at least 2 observations required");
  require_finite(x, "covariance");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  return (cov + cov.transpose()) * 0.5;
}

Matrix correlation_matrix(const Matrix& x, std::span<const std::string> labels) {
  if (x.rows() < 2) throw InputError("correlation: at least 2 observations required");
  require_finite(x, "correlation");
  const auto mom = column_moments(x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (mom.sd(j) <= 1e-12 * (1.0 + std::abs(mom.mean(j)))) {
      const std::string name = static_cast<std::size_t>(j) < labels.size()
                                   ? "'" + labels[static_cast<std::size_t>(j)] + "'"
                                   : "#" + std::to_string(j);
      throw InputError("correlation: column " + name + " is constant");
    }
  }
  Matrix z = x.rowwise() - mom.mean.transpose();
  z.array().rowwise() /= mom.sd.transpose().array();
  Matrix r = (z.transpose() * z) / static_cast<double>(x.rows() - 1);
  r = (r + r.transpose()) * 0.5;
  r.diagonal().setOnes();
  return r;
}

MultiOlsResult ols_multi(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw InputError("ols: design and response row counts differ");
  if (x.rows() < x.cols()) throw InputError("ols: fewer rows than design columns");
  require_finite(x, "ols design");
  require_finite(y, "ols response");

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(x);
  MultiOlsResult out;
  out.rank = cod.rank();
  out.coefficients = cod.solve(y);
  out.residuals = y - x * out.coefficients;
  if (out.rank < x.cols()) {
    out.warnings.push_back("ols: design is rank deficient (rank " + std::to_string(out.rank) + " of " +
                           std::to_string(x.cols()) + "); returning the minimum-norm solution");
  }
  return out;
}

OlsResult ols(const Matrix& x, const Vector& y, bool intercept) {
  Matrix design = x;
  if (intercept) {
    design.conservativeResize(Eigen::NoChange, x.cols() + 1);
    design.col(x.cols()).setOnes();
  }
  auto multi = ols_multi(design, y);
  OlsResult out;
  out.coefficients = multi.coefficients.col(0).head(x.cols());
  out.intercept = intercept ? multi.coefficients(x.cols(), 0) : 0.0;
  out.residuals = multi.residuals.col(0);
  out.rank = multi.rank;
  out.warnings = std::move(multi.warnings);
  return out;
}

} // namespace taskfactor::num
