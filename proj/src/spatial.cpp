#include "paneval/spatial.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace paneval {

void validate_point(const GeoPoint& p) {
  require(p.lon >= -180.0 && p.lon <= 180.0, ErrorCode::InvalidSpec,
          "longitude out of range: " + format_number(p.lon, 6));
  require(p.lat >= -90.0 && p.lat <= 90.0, ErrorCode::InvalidSpec,
          "latitude out of range: " + format_number(p.lat, 6));
}

double haversine(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kDegToRad = 0.017453292519943295;
  double phi1 = a.lat * kDegToRad, phi2 = b.lat * kDegToRad;
  double dphi = (b.lat - a.lat) * kDegToRad;
  double dlam = (b.lon - a.lon) * kDegToRad;
  double s = std::sin(dphi / 2.0), t = std::sin(dlam / 2.0);
  double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

namespace {

std::map<std::string, Index> entity_lookup(const std::vector<std::string>& entities) {
  std::map<std::string, Index> m;
  for (std::size_t i = 0; i < entities.size(); ++i)
    m.emplace(entities[i], static_cast<Index>(i));
  return m;
}

}  // namespace

SpatialWeights build_weights_adjacency(
    const std::vector<std::string>& entities,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  auto lookup = entity_lookup(entities);
  SpatialWeights w;
  w.entities = entities;
  w.construction = WeightsConstruction::AdjacencyPairs;
  const Index n = static_cast<Index>(entities.size());
  w.W = Matd::Zero(n, n);
  for (const auto& [a, b] : pairs) {
    auto ia = lookup.find(a);
    auto ib = lookup.find(b);
    require(ia != lookup.end(), ErrorCode::UnknownEntity, "unknown entity '" + a + "'");
    require(ib != lookup.end(), ErrorCode::UnknownEntity, "unknown entity '" + b + "'");
    require(ia->second != ib->second, ErrorCode::SelfLoop, "self pair (" + a + ", " + a + ")");
    w.W(ia->second, ib->second) = 1.0;
    w.W(ib->second, ia->second) = 1.0;
  }
  return w;
}

SpatialWeights build_weights_inverse_distance(const std::vector<std::string>& entities,
                                              const std::vector<GeoPoint>& centroids,
                                              double cutoff_km) {
  require(entities.size() == centroids.size(), ErrorCode::InvalidSpec,
          "one centroid per entity required");
  require(cutoff_km > 0.0, ErrorCode::InvalidSpec, "cutoff must be positive");
  for (const auto& p : centroids) validate_point(p);
  SpatialWeights w;
  w.entities = entities;
  w.construction = WeightsConstruction::InverseDistanceCutoff;
  const Index n = static_cast<Index>(entities.size());
  w.W = Matd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      double d = haversine(centroids[static_cast<std::size_t>(i)],
                           centroids[static_cast<std::size_t>(j)]);
      if (d > 0.0 && d <= cutoff_km) w.W(i, j) = w.W(j, i) = 1.0 / d;
    }
  return w;
}

SpatialWeights build_weights_knn(const std::vector<std::string>& entities,
                                 const std::vector<GeoPoint>& centroids, int k) {
  require(entities.size() == centroids.size(), ErrorCode::InvalidSpec,
          "one centroid per entity required");
  require(k >= 1, ErrorCode::InvalidSpec, "k must be >= 1");
  for (const auto& p : centroids) validate_point(p);
  SpatialWeights w;
  w.entities = entities;
  w.construction = WeightsConstruction::KNearest;
  const Index n = static_cast<Index>(entities.size());
  w.W = Matd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, Index>> dist;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist.emplace_back(haversine(centroids[static_cast<std::size_t>(i)],
                                  centroids[static_cast<std::size_t>(j)]),
                        j);
    }
    std::sort(dist.begin(), dist.end());
    for (Index r = 0; r < std::min<Index>(k, static_cast<Index>(dist.size())); ++r)
      w.W(i, dist[static_cast<std::size_t>(r)].second) = 1.0;
  }
  return w;
}

SpatialWeights row_normalize(const SpatialWeights& w) {
  SpatialWeights out = w;
  out.zero_rows.clear();
  for (Index i = 0; i < out.W.rows(); ++i) {
    double s = out.W.row(i).sum();
    if (s > 0.0) {
      out.W.row(i) /= s;
    } else {
      out.zero_rows.push_back(out.entities[static_cast<std::size_t>(i)]);
    }
  }
  out.row_normalized = true;
  return out;
}

std::vector<std::pair<std::string, std::string>> load_adjacency_pairs(const std::string& path) {
  CsvTable table = read_csv(path);
  require(table.header.size() == 2 && table.header[0] == "entity_a" &&
              table.header[1] == "entity_b",
          ErrorCode::RaggedHeader, path + ": header must be 'entity_a,entity_b'");
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(table.rows.size());
  for (const auto& row : table.rows) pairs.emplace_back(row[0], row[1]);
  return pairs;
}

std::vector<std::pair<std::string, GeoPoint>> load_centroids(const std::string& path) {
  CsvTable table = read_csv(path);
  require(table.header.size() == 3 && table.header[0] == "entity" &&
              table.header[1] == "lon" && table.header[2] == "lat",
          ErrorCode::RaggedHeader, path + ": header must be 'entity,lon,lat'");
  std::vector<std::pair<std::string, GeoPoint>> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    GeoPoint p{parse_number(table.rows[r][1], r + 1, "lon"),
               parse_number(table.rows[r][2], r + 1, "lat")};
    validate_point(p);
    out.emplace_back(table.rows[r][0], p);
  }
  return out;
}

std::vector<ZoneSite> load_zones(const std::string& path) {
  CsvTable table = read_csv(path);
  require(table.header.size() == 3 && table.header[0] == "lon" && table.header[1] == "lat" &&
              table.header[2] == "year",
          ErrorCode::RaggedHeader, path + ": header must be 'lon,lat,year'");
  std::vector<ZoneSite> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    ZoneSite z;
    z.location = {parse_number(table.rows[r][0], r + 1, "lon"),
                  parse_number(table.rows[r][1], r + 1, "lat")};
    validate_point(z.location);
    z.year = static_cast<int>(parse_integer(table.rows[r][2], r + 1, "year"));
    out.push_back(z);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spatial Durbin model
// ---------------------------------------------------------------------------

double SdmProfile::loglik(double rho) const {
  const double nt = static_cast<double>(n) * static_cast<double>(t);
  double sse = sse_const - 2.0 * sse_lin * rho + sse_quad * rho * rho;
  if (!(sse > 0.0)) return -std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  for (const auto& lam : eigenvalues) logdet += std::log(std::abs(1.0 - rho * lam));
  constexpr double kLogTwoPi = 1.8378770664093454836;
  return static_cast<double>(t) * logdet -
         0.5 * nt * (kLogTwoPi + 1.0 + std::log(sse / nt));
}

namespace {

struct SdmContext {
  SdmProfile profile;
  Vecd coef_y, coef_w;        // regressions of y~ and (Wy)~ on the design
  Matd xtx_inv;
  Vecd e0, e1;                // matching residuals
  std::vector<std::string> names;
  std::vector<std::string> dropped;
  long absorbed = 0;
};

SdmContext sdm_context(const PanelDataset& ds, const SpatialWeights& W,
                       const TreatmentPanel& treatment, const SdmSpec& spec) {
  require(W.entities == ds.entities, ErrorCode::InvalidSpec,
          "weight matrix entities do not match the panel");
  require(W.row_normalized, ErrorCode::NonNormalizedWeights,
          "sdm_fit requires a row-normalized weight matrix");
  for (Index i = 0; i < W.W.rows(); ++i) {
    double s = W.W.row(i).sum();
    require(std::abs(s - 1.0) <= 1e-9 || std::abs(s) <= 1e-12,
            ErrorCode::NonNormalizedWeights,
            "row " + std::to_string(i) + " sums to " + format_number(s, 10));
  }
  require(treatment.entities == ds.entities && treatment.first_year == ds.first_year,
          ErrorCode::InvalidSpec, "treatment panel is not aligned with the dataset");

  const Index ne = ds.n_entities();
  const Index ny = ds.n_years();
  const Matd& Y = ds.column(spec.outcome);
  require(!Y.hasNaN(), ErrorCode::UnbalancedPanel,
          "outcome has missing cells; interpolate and clamp before sdm_fit");
  std::vector<const Matd*> xs;
  for (const auto& c : spec.controls) {
    xs.push_back(&ds.column(c));
    require(!xs.back()->hasNaN(), ErrorCode::UnbalancedPanel,
            "control '" + c + "' has missing cells; interpolate and clamp before sdm_fit");
  }

  Matd WY = W.W * Y;
  std::vector<Matd> WX;
  if (spec.lag_controls)
    for (const Matd* x : xs) WX.push_back(W.W * (*x));

  // Rows = all cells; columns = [y, Wy, D, X..., WX...], demeaned jointly.
  const Index cells = ne * ny;
  const Index k_design = 1 + static_cast<Index>(xs.size()) + static_cast<Index>(WX.size());
  Matd data(cells, 2 + k_design);
  std::vector<int> cell_entity(static_cast<std::size_t>(cells));
  std::vector<int> cell_year(static_cast<std::size_t>(cells));
  for (Index i = 0; i < ne; ++i)
    for (Index j = 0; j < ny; ++j) {
      Index r = i * ny + j;
      cell_entity[static_cast<std::size_t>(r)] = static_cast<int>(i);
      cell_year[static_cast<std::size_t>(r)] = static_cast<int>(j);
      data(r, 0) = Y(i, j);
      data(r, 1) = WY(i, j);
      data(r, 2) = treatment.D(i, j);
      Index c = 3;
      for (const Matd* x : xs) data(r, c++) = (*x)(i, j);
      for (const Matd& wx : WX) data(r, c++) = wx(i, j);
    }
  demean_two_way<double>(data, cell_entity, cell_year, static_cast<int>(ne),
                         static_cast<int>(ny));

  std::vector<std::string> names{kTreatmentName};
  for (const auto& c : spec.controls) names.push_back(c);
  if (spec.lag_controls)
    for (const auto& c : spec.controls) names.push_back("W_" + c);

  Matd Z = data.rightCols(k_design);
  require(Z.col(0).cwiseAbs().maxCoeff() > 1e-9, ErrorCode::NoVariation,
          "treatment dummy has no within variation");
  Vecd yd = data.col(0);
  Vecd wyd = data.col(1);

  auto ky = ols_kernel<double>(Z, yd);
  Matd Zr(cells, static_cast<Index>(ky.retained.size()));
  SdmContext ctx;
  for (std::size_t c = 0; c < ky.retained.size(); ++c) {
    Zr.col(static_cast<Index>(c)) = Z.col(ky.retained[c]);
    ctx.names.push_back(names[static_cast<std::size_t>(ky.retained[c])]);
  }
  for (int idx : ky.dropped) ctx.dropped.push_back(names[static_cast<std::size_t>(idx)]);
  require(!ctx.names.empty() && ctx.names[0] == kTreatmentName, ErrorCode::NoVariation,
          "treatment dummy dropped as collinear");
  auto kw = ols_kernel<double>(Zr, wyd);

  ctx.coef_y = ky.coef;
  ctx.coef_w = kw.coef;
  ctx.xtx_inv = ky.xtx_inv;
  ctx.e0 = ky.residuals;
  ctx.e1 = kw.residuals;
  ctx.absorbed = static_cast<long>(ne) + static_cast<long>(ny) - 1;

  SdmProfile& prof = ctx.profile;
  prof.sse_const = ctx.e0.squaredNorm();
  prof.sse_lin = ctx.e0.dot(ctx.e1);
  prof.sse_quad = ctx.e1.squaredNorm();
  prof.n = static_cast<long>(ne);
  prof.t = static_cast<long>(ny);

  Eigen::EigenSolver<Matd> eig(W.W, /*computeEigenvectors=*/false);
  double lam_max = 0.0, lam_min = 0.0;
  bool any = false;
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) {
    std::complex<double> lam = eig.eigenvalues()[i];
    prof.eigenvalues.push_back(lam);
    if (std::abs(lam) > 1e-12) any = true;
    if (std::abs(lam.imag()) <= 1e-8) {
      lam_max = std::max(lam_max, lam.real());
      lam_min = std::min(lam_min, lam.real());
    }
  }
  if (!any) {
    prof.degenerate = true;
    prof.interval = {0.0, 0.0};
    return ctx;
  }
  require(std::abs(lam_max - 1.0) <= 1e-6, ErrorCode::NonNormalizedWeights,
          "largest eigenvalue is " + format_number(lam_max, 10) +
              ", expected 1 for row-normalized weights");
  double lower = lam_min < -1e-12 ? 1.0 / lam_min : -1.0 + 1e-9;
  prof.interval = {lower, 1.0};
  return ctx;
}

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol) {
  constexpr double invphi = 0.6180339887498948482;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

SdmProfile sdm_profile(const PanelDataset& ds, const SpatialWeights& W,
                       const TreatmentPanel& treatment, const SdmSpec& spec) {
  return sdm_context(ds, W, treatment, spec).profile;
}

SdmFit sdm_fit(const PanelDataset& ds, const SpatialWeights& W,
               const TreatmentPanel& treatment, const SdmSpec& spec) {
  SdmContext ctx = sdm_context(ds, W, treatment, spec);
  const SdmProfile& prof = ctx.profile;

  SdmFit fit;
  fit.coef_names = ctx.names;
  fit.dropped_columns = ctx.dropped;
  fit.rho_interval = prof.interval;
  fit.nobs = prof.n * prof.t;

  if (prof.degenerate) {
    fit.rho = 0.0;
    fit.warnings.push_back(
        "degenerate likelihood: weight matrix has no spectrum, rho pinned at 0");
  } else if (spec.fixed_rho) {
    fit.rho = *spec.fixed_rho;
    require(fit.rho > prof.interval.first && fit.rho < prof.interval.second,
            ErrorCode::InvalidSpec, "fixed rho outside the admissible interval");
  } else {
    const double margin = 1e-8;
    double lo = prof.interval.first + margin;
    double hi = prof.interval.second - margin;
    fit.rho = golden_section_max([&](double r) { return prof.loglik(r); }, lo, hi,
                                 spec.rho_tol);
    require(fit.rho - prof.interval.first >= 1e-4 && prof.interval.second - fit.rho >= 1e-4,
            ErrorCode::RhoAtBoundary,
            "profile optimum at " + format_number(fit.rho, 10) +
                " sits on the boundary of (" + format_number(prof.interval.first, 10) + ", " +
                format_number(prof.interval.second, 10) + ")");

    // Curvature of the profile gives the rho standard error.
    double h = 1e-5 * (prof.interval.second - prof.interval.first);
    double d2 = (prof.loglik(fit.rho + h) - 2.0 * prof.loglik(fit.rho) +
                 prof.loglik(fit.rho - h)) /
                (h * h);
    if (d2 < 0.0) fit.rho_se = 1.0 / std::sqrt(-d2);
  }

  fit.coef = ctx.coef_y - fit.rho * ctx.coef_w;
  Vecd resid = ctx.e0 - fit.rho * ctx.e1;
  double sse = resid.squaredNorm();
  long k = static_cast<long>(fit.coef.size());
  long dof = fit.nobs - k - ctx.absorbed;
  double sigma2 = dof > 0 ? sse / static_cast<double>(dof) : missing();
  Matd vcov = sigma2 * ctx.xtx_inv;
  fit.se.resize(k);
  for (long i = 0; i < k; ++i) fit.se[i] = vcov(i, i) >= 0.0 ? std::sqrt(vcov(i, i)) : missing();
  fit.delta = fit.coef[0];
  fit.log_likelihood = prof.degenerate ? missing() : prof.loglik(fit.rho);
  return fit;
}

// ---------------------------------------------------------------------------
// Rings
// ---------------------------------------------------------------------------

int ring_index(double dist_km, double d_km, int m) {
  if (dist_km < 0.0) return 0;
  if (dist_km == 0.0) return 1;
  int n = static_cast<int>(std::ceil(dist_km / d_km));
  return n <= m ? n : 0;
}

RingPanel ring_dummies(const std::vector<std::string>& entities,
                       const std::vector<GeoPoint>& centroids,
                       const std::vector<ZoneSite>& zones, int first_year, int last_year,
                       double d_km, int m, int lag, bool exclude_own) {
  require(entities.size() == centroids.size(), ErrorCode::InvalidSpec,
          "one centroid per entity required");
  require(d_km > 0.0, ErrorCode::InvalidSpec, "ring width must be positive");
  require(m >= 1, ErrorCode::InvalidSpec, "ring count must be >= 1");
  for (const auto& p : centroids) validate_point(p);
  for (const auto& z : zones) validate_point(z.location);

  RingPanel rp;
  rp.d_km = d_km;
  rp.m = m;
  rp.lag = lag;
  rp.exclude_own = exclude_own;
  rp.entities = entities;
  rp.first_year = first_year;
  rp.last_year = last_year;
  const Index ne = static_cast<Index>(entities.size());
  const Index ny = static_cast<Index>(last_year - first_year + 1);
  rp.rings.assign(static_cast<std::size_t>(m), Matd::Zero(ne, ny));

  // Each zone belongs to the entity with the nearest centroid.
  std::vector<Index> owner(zones.size(), -1);
  for (std::size_t z = 0; z < zones.size(); ++z) {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < ne; ++i) {
      double d = haversine(centroids[static_cast<std::size_t>(i)], zones[z].location);
      if (d < best) {
        best = d;
        owner[z] = i;
      }
    }
  }

  for (std::size_t z = 0; z < zones.size(); ++z) {
    int onset = zones[z].year + lag;
    if (onset > last_year) continue;
    Index j0 = static_cast<Index>(std::max(onset, first_year) - first_year);
    for (Index i = 0; i < ne; ++i) {
      if (exclude_own && owner[z] == i) continue;
      double dist = haversine(centroids[static_cast<std::size_t>(i)], zones[z].location);
      int n = ring_index(dist, d_km, m);
      if (n == 0) continue;
      for (Index j = j0; j < ny; ++j) rp.rings[static_cast<std::size_t>(n - 1)](i, j) = 1.0;
    }
  }
  return rp;
}

FitResult ring_regression(const PanelDataset& ds, const TreatmentPanel& treatment,
                          const RingPanel& rings, const std::string& outcome,
                          const std::vector<std::string>& controls, const std::string& cluster) {
  require(rings.entities == ds.entities && rings.first_year == ds.first_year &&
              rings.last_year == ds.last_year,
          ErrorCode::InvalidSpec, "ring panel is not aligned with the dataset");
  PanelDataset work = with_treatment_column(ds, treatment);
  std::vector<std::string> ring_names;
  for (int n = 1; n <= rings.m; ++n) {
    std::string name = "ring_" + std::to_string(n);
    work.add_column(name, rings.rings[static_cast<std::size_t>(n - 1)]);
    ring_names.push_back(name);
  }
  DesignSpec spec;
  spec.outcome = outcome;
  spec.regressors.push_back(kTreatmentName);
  spec.regressors.insert(spec.regressors.end(), controls.begin(), controls.end());
  spec.regressors.insert(spec.regressors.end(), ring_names.begin(), ring_names.end());
  spec.cluster = cluster;
  TwfeOptions opts;
  opts.drop_constant = true;  // rings without in-sample variation drop out
  return twfe_fit(work, spec, opts);
}

}  // namespace paneval
