#pragma once

#include "taskfactor/error.hpp"
#include "taskfactor/labeled_matrix.hpp"

#include <span>
#include <string>

namespace taskfactor::num {

/// Spectral conventions shared by every decomposition in the library:
/// values are sorted descending, and each vector is oriented so that its
/// largest-magnitude component (first one on ties) is non-negative.
struct EigenResult {
  Vector values;
  Matrix vectors;
};

struct SvdResult {
  Matrix u;
  Vector sigma;
  Matrix v;
};

inline constexpr double kSymmetryTolerance = 1e-8;

/// Full eigendecomposition of a symmetric matrix.
EigenResult sym_eig(const Matrix& m);

/// Top-`rank` singular triplets. The sign convention is applied to v and the
/// matching column of u flipped with it.
SvdResult truncated_svd(const Matrix& m, Eigen::Index rank);

/// Flip `vec` so its largest-magnitude entry is non-negative. Returns the
/// applied sign.
double orient(Eigen::Ref<Vector> vec);

/// Pearson correlation of the columns of `x` (observations x variables).
/// `labels` name the columns in error messages and may be empty.
Matrix correlation_matrix(const Matrix& x, std::span<const std::string> labels = {});

/// Sample covariance with the n-1 denominator.
Matrix covariance_matrix(const Matrix& x);

struct ColumnMoments {
  Vector mean;
  Vector sd; ///< n-1 denominator
};

ColumnMoments column_moments(const Matrix& x);

struct OlsResult {
  Vector coefficients; ///< one per column of the design, intercept excluded
  double intercept = 0.0;
  Vector residuals;
  Eigen::Index rank = 0;
  Warnings warnings;
};

/// Least squares via complete orthogonal decomposition. Rank-deficient
/// designs yield the minimum-norm solution and a warning.
OlsResult ols(const Matrix& x, const Vector& y, bool intercept);

struct MultiOlsResult {
  Matrix coefficients; ///< design columns x responses
  Matrix residuals;    ///< same shape as the responses
  Eigen::Index rank = 0;
  Warnings warnings;
};

/// Same as `ols` for several responses sharing one design (no implicit
/// intercept; add a ones column yourself).
MultiOlsResult ols_multi(const Matrix& x, const Matrix& y);

void require_finite(const Matrix& m, const char* what);

} // namespace taskfactor::num
