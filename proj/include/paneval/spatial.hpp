#pragma once

#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paneval/did.hpp"
#include "paneval/panel.hpp"
#include "paneval/regress.hpp"

namespace paneval {

// ---------------------------------------------------------------------------
// Geography
// ---------------------------------------------------------------------------

struct GeoPoint {
  double lon = 0.0;  // degrees in [-180, 180]
  double lat = 0.0;  // degrees in [-90, 90]
};

void validate_point(const GeoPoint& p);

/// Great-circle distance in km, Earth radius 6371.0 km.
double haversine(const GeoPoint& a, const GeoPoint& b);

// ---------------------------------------------------------------------------
// Spatial weights
// ---------------------------------------------------------------------------

enum class WeightsConstruction { AdjacencyPairs, InverseDistanceCutoff, KNearest };

struct SpatialWeights {
  std::vector<std::string> entities;  // ordering matches the panel
  Matd W;                             // zero diagonal, non-negative
  bool row_normalized = false;
  WeightsConstruction construction = WeightsConstruction::AdjacencyPairs;
  std::vector<std::string> zero_rows;  // isolated entities after normalization
};

SpatialWeights build_weights_adjacency(const std::vector<std::string>& entities,
                                       const std::vector<std::pair<std::string, std::string>>& pairs);
SpatialWeights build_weights_inverse_distance(const std::vector<std::string>& entities,
                                              const std::vector<GeoPoint>& centroids,
                                              double cutoff_km);
SpatialWeights build_weights_knn(const std::vector<std::string>& entities,
                                 const std::vector<GeoPoint>& centroids, int k);

/// Divides every nonzero row by its sum; zero rows stay zero and are listed.
SpatialWeights row_normalize(const SpatialWeights& w);

std::vector<std::pair<std::string, std::string>> load_adjacency_pairs(const std::string& path);
std::vector<std::pair<std::string, GeoPoint>> load_centroids(const std::string& path);

// ---------------------------------------------------------------------------
// Spatial Durbin model, concentrated maximum likelihood
// ---------------------------------------------------------------------------

struct SdmSpec {
  std::string outcome;
  std::vector<std::string> controls;
  bool lag_controls = true;              // include W X terms
  std::optional<double> fixed_rho;       // skip the search when set
  double rho_tol = 1e-6;                 // golden-section tolerance
};

struct SdmFit {
  double rho = 0.0;
  double rho_se = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();  // treatment coefficient
  std::vector<std::string> coef_names;  // hightech, controls..., W_<control>...
  Vecd coef;
  Vecd se;
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();
  std::pair<double, double> rho_interval{0.0, 0.0};
  long nobs = 0;
  std::vector<std::string> dropped_columns;
  std::vector<std::string> warnings;
};

/// Concentrated profile in rho. The transformed response y - rho*(W y) is
/// linear in rho, so after regressing y and Wy on the demeaned [D, X, WX]
/// design once, SSE(rho) is an exact quadratic and evaluating the profile
/// log-likelihood is O(#eigenvalues).
struct SdmProfile {
  double sse_const = 0.0, sse_lin = 0.0, sse_quad = 0.0;  // SSE = c0 - 2*c1*rho + c2*rho^2
  std::vector<std::complex<double>> eigenvalues;          // of W, computed once
  long n = 0;  // entities
  long t = 0;  // periods
  std::pair<double, double> interval{0.0, 0.0};  // admissible rho range
  bool degenerate = false;                       // W has no spectrum (zero matrix)

  /// T*log|I - rho W| - (NT/2)*log(SSE(rho)/NT) plus the Gaussian constant.
  double loglik(double rho) const;
};

/// Profiles rho over (1/lambda_min, 1) by golden-section search on the exact
/// quadratic profile; the per-period log-determinant T*log|I - rho W| comes
/// from a one-time eigendecomposition of W.
SdmFit sdm_fit(const PanelDataset& ds, const SpatialWeights& W,
               const TreatmentPanel& treatment, const SdmSpec& spec);

/// The profile sdm_fit maximizes; exposed for grid-scan cross-checks.
SdmProfile sdm_profile(const PanelDataset& ds, const SpatialWeights& W,
                       const TreatmentPanel& treatment, const SdmSpec& spec);

// ---------------------------------------------------------------------------
// Ring-distance spillover design
// ---------------------------------------------------------------------------

struct ZoneSite {
  GeoPoint location;
  int year = 0;  // establishment year
};

std::vector<ZoneSite> load_zones(const std::string& path);

/// Ring index for a distance: rings are ((n-1)d, nd], so n = ceil(dist/d);
/// distance 0 counts as ring 1 (ownership handling is the caller's job).
/// Returns 0 when the distance is beyond ring m.
int ring_index(double dist_km, double d_km, int m);

struct RingPanel {
  double d_km = 10.0;
  int m = 4;
  int lag = 1;
  bool exclude_own = true;
  std::vector<std::string> entities;
  int first_year = 0;
  int last_year = -1;
  std::vector<Matd> rings;  // m matrices, entities x years, 0/1, absorbing in t
};

/// R(i,t,n) = 1 iff some zone sits in ring n of entity i and was established
/// at least `lag` years before t. Each zone belongs to the entity with the
/// nearest centroid; with exclude_own it never lights up its own entity's
/// rings (that is the direct treatment, not spillover).
RingPanel ring_dummies(const std::vector<std::string>& entities,
                       const std::vector<GeoPoint>& centroids,
                       const std::vector<ZoneSite>& zones, int first_year, int last_year,
                       double d_km, int m, int lag = 1, bool exclude_own = true);

/// TWFE fit with hightech, controls and the ring indicators ring_1..ring_m;
/// rings without in-sample variation are dropped and reported, not fatal.
FitResult ring_regression(const PanelDataset& ds, const TreatmentPanel& treatment,
                          const RingPanel& rings, const std::string& outcome,
                          const std::vector<std::string>& controls,
                          const std::string& cluster = "");

}  // namespace paneval
