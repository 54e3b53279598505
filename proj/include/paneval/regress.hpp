#pragma once

#include <optional>
#include <string>
#include <vector>

#include "paneval/errors.hpp"
#include "paneval/panel.hpp"
#include "paneval/types.hpp"

namespace paneval {

// ---------------------------------------------------------------------------
// Scalar-templated kernels
// ---------------------------------------------------------------------------

/// Alternating within-transformation: subtracts group means over two groupings
/// (entity, year) from every column until the largest applied mean is below
/// tol. Balanced panels converge after one sweep; unbalanced ones iterate.
/// Returns the number of sweeps used.
template <typename Scalar>
int demean_two_way(Mat<Scalar>& data, const std::vector<int>& entity_of_row,
                   const std::vector<int>& year_of_row, int n_entities, int n_years,
                   Scalar tol = Scalar(1e-10), int max_sweeps = 10000) {
  const Index rows = data.rows();
  const Index cols = data.cols();
  Vec<Scalar> group_sum(std::max(n_entities, n_years));
  Vec<Scalar> group_cnt(std::max(n_entities, n_years));

  auto sweep_group = [&](const std::vector<int>& group_of_row, int n_groups) {
    Scalar worst = 0;
    for (Index c = 0; c < cols; ++c) {
      group_sum.head(n_groups).setZero();
      group_cnt.head(n_groups).setZero();
      for (Index r = 0; r < rows; ++r) {
        group_sum[group_of_row[static_cast<std::size_t>(r)]] += data(r, c);
        group_cnt[group_of_row[static_cast<std::size_t>(r)]] += 1;
      }
      for (int g = 0; g < n_groups; ++g)
        if (group_cnt[g] > 0) {
          group_sum[g] /= group_cnt[g];
          worst = std::max(worst, std::abs(group_sum[g]));
        }
      for (Index r = 0; r < rows; ++r)
        data(r, c) -= group_sum[group_of_row[static_cast<std::size_t>(r)]];
    }
    return worst;
  };

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    Scalar a = sweep_group(entity_of_row, n_entities);
    Scalar b = sweep_group(year_of_row, n_years);
    if (std::max(a, b) < tol) return sweep;
  }
  raise(ErrorCode::NoConvergence, "two-way demeaning did not converge");
}

/// Least-squares kernel. Collinear columns are detected by Gram-Schmidt
/// against the span of earlier columns and dropped deterministically
/// (last-in dropped first); the solve runs on the retained block.
template <typename Scalar>
struct OlsKernel {
  Vec<Scalar> coef;           // over retained columns
  std::vector<int> retained;  // original column indices, order preserved
  std::vector<int> dropped;
  Vec<Scalar> residuals;
  Mat<Scalar> xtx_inv;  // retained x retained
  Scalar sse = 0;
  Index nobs = 0;
};

template <typename Scalar>
OlsKernel<Scalar> ols_kernel(const Mat<Scalar>& X, const Vec<Scalar>& y,
                             Scalar collin_tol = Scalar(1e-10)) {
  OlsKernel<Scalar> out;
  out.nobs = X.rows();
  require(out.nobs > 0, ErrorCode::EmptySample, "no rows in the estimation sample");
  require(X.rows() == y.rows(), ErrorCode::InvalidSpec, "design and response sizes differ");

  // Rank filter: modified Gram-Schmidt with re-orthogonalization.
  Mat<Scalar> basis(X.rows(), X.cols());
  Index rank = 0;
  for (Index j = 0; j < X.cols(); ++j) {
    Vec<Scalar> v = X.col(j);
    const Scalar norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (Index k = 0; k < rank; ++k) v -= basis.col(k).dot(v) * basis.col(k);
    const Scalar norm1 = v.norm();
    if (norm0 <= Scalar(0) || norm1 <= collin_tol * norm0) {
      out.dropped.push_back(static_cast<int>(j));
    } else {
      basis.col(rank) = v / norm1;
      ++rank;
      out.retained.push_back(static_cast<int>(j));
    }
  }
  require(rank > 0, ErrorCode::AllColumnsCollinear, "every design column was dropped");

  Mat<Scalar> Xr(X.rows(), rank);
  for (Index k = 0; k < rank; ++k) Xr.col(k) = X.col(out.retained[static_cast<std::size_t>(k)]);

  Eigen::HouseholderQR<Mat<Scalar>> qr(Xr);
  out.coef = qr.solve(y);
  out.residuals = y - Xr * out.coef;
  out.sse = out.residuals.squaredNorm();

  Mat<Scalar> R = qr.matrixQR().topRows(rank).template triangularView<Eigen::Upper>();
  Mat<Scalar> Rinv = R.template triangularView<Eigen::Upper>().solve(Mat<Scalar>::Identity(rank, rank));
  out.xtx_inv = Rinv * Rinv.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Fit results
// ---------------------------------------------------------------------------

struct DesignSpec {
  std::string outcome;
  std::vector<std::string> regressors;
  bool entity_effects = true;
  bool year_effects = true;
  std::string cluster;  // "", "entity", meta attribute, or time-invariant column
};

struct FitResult {
  std::vector<std::string> coef_names;  // retained, in design order
  Vecd coef;
  Matd vcov;
  Vecd se;
  Matd residuals;  // entity x year for panel fits (NaN off-sample), n x 1 otherwise
  long nobs = 0;
  double r2_within = std::numeric_limits<double>::quiet_NaN();
  double r2_between = std::numeric_limits<double>::quiet_NaN();
  double r2_overall = std::numeric_limits<double>::quiet_NaN();
  double r2_adjusted = std::numeric_limits<double>::quiet_NaN();
  double r2_pseudo = std::numeric_limits<double>::quiet_NaN();  // logit only
  std::vector<std::string> dropped_columns;

  // Estimation-sample internals kept for covariance recomputation.
  struct Workspace {
    Matd X;             // design actually solved (demeaned for TWFE)
    Vecd resid;         // residual vector over sample rows
    std::vector<int> row_entity;  // empty for raw OLS fits
    std::vector<int> row_year;
    long dof_used = 0;  // parameters charged against residual dof
    long n_slopes = 0;  // retained slope columns
  } work;

  int index_of(const std::string& name) const;
  double coef_of(const std::string& name) const;
  double se_of(const std::string& name) const;
};

/// Plain OLS on a prepared design matrix. Homoskedastic vcov with
/// dof = rows - retained columns.
FitResult ols_fit(const Matd& X, const Vecd& y, const std::vector<std::string>& names);

struct TwfeOptions {
  // Constant regressors (after listwise deletion) abort with NoVariation by
  // default; with drop_constant they are dropped and reported instead.
  bool drop_constant = false;
  double demean_tol = 1e-10;
};

/// Two-way fixed effects (within) estimator. Rows with any missing value in
/// the outcome or a regressor are deleted listwise; alternating demeaning is
/// iterated to tolerance, then OLS runs on the demeaned sample. Slope
/// estimates agree with explicit dummy-variable OLS. When spec.cluster is
/// set, the covariance is replaced by the CR1 cluster sandwich.
FitResult twfe_fit(const PanelDataset& ds, const DesignSpec& spec, const TwfeOptions& opts = {});

// ---------------------------------------------------------------------------
// Cluster-robust covariance
// ---------------------------------------------------------------------------

struct ClusterSpec {
  std::vector<int> cluster_of_entity;  // aligned with a panel's entities
  int n_clusters = 0;

  static ClusterSpec by_entity(Index n_entities);
  /// Resolves "entity", a meta attribute, or a time-invariant numeric column.
  static ClusterSpec resolve(const PanelDataset& ds, const std::string& name);
};

/// CR1 sandwich on the fit's own estimation sample:
/// (G/(G-1)) * ((N-1)/(N-K)) * (X'X)^-1 [sum_g s_g s_g'] (X'X)^-1,
/// with K the number of estimated slope parameters.
void apply_cluster_vcov(FitResult& fit, const ClusterSpec& clusters);

/// Same, on explicit pieces; cluster ids are per sample row.
Matd cr1_vcov(const Matd& X, const Vecd& resid, const std::vector<int>& cluster_of_row,
              long k_params);

struct R2Suite {
  double within, between, overall, adjusted;
};

/// Recomputes the four reported R-squared values for a TWFE fit.
R2Suite r2_suite(const FitResult& fit, const PanelDataset& ds, const DesignSpec& spec);

// ---------------------------------------------------------------------------
// Logit maximum likelihood (pooled)
// ---------------------------------------------------------------------------

/// Newton-Raphson logit with an automatic intercept ("_cons"), HC1 robust
/// covariance and McFadden pseudo R-squared. Binary 0/1 outcome required;
/// a coefficient passing |b| > 30 during iteration aborts with
/// PerfectSeparation.
FitResult logit_fit(const PanelDataset& ds, const DesignSpec& spec);
FitResult logit_fit_raw(const Matd& X, const Vecd& y, const std::vector<std::string>& names);

}  // namespace paneval
