#include "paneval/regress.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace paneval {

namespace {

double sq_corr(const Vecd& a, const Vecd& b) {
  if (a.size() == 0 || a.size() != b.size()) return missing();
  const double n = static_cast<double>(a.size());
  Vecd ca = a.array() - a.mean();
  Vecd cb = b.array() - b.mean();
  double na = ca.norm(), nb = cb.norm();
  if (na <= 1e-12 * (1.0 + a.norm() / std::sqrt(n)) ||
      nb <= 1e-12 * (1.0 + b.norm() / std::sqrt(n)))
    return missing();
  double r = ca.dot(cb) / (na * nb);
  return r * r;
}

Vecd sqrt_diag(const Matd& v) {
  Vecd se(v.rows());
  for (Index i = 0; i < v.rows(); ++i) se[i] = v(i, i) >= 0.0 ? std::sqrt(v(i, i)) : missing();
  return se;
}

struct SampleRows {
  std::vector<int> entity;  // panel entity index per row
  std::vector<int> year;    // panel year index per row
  Vecd y;
  Matd X;  // levels, one column per regressor
};

SampleRows collect_rows(const PanelDataset& ds, const DesignSpec& spec) {
  for (const auto& r : spec.regressors)
    require(r != spec.outcome, ErrorCode::InvalidSpec,
            "outcome '" + spec.outcome + "' cannot be a regressor");
  const Matd& ycol = ds.column(spec.outcome);
  std::vector<const Matd*> xcols;
  xcols.reserve(spec.regressors.size());
  for (const auto& r : spec.regressors) xcols.push_back(&ds.column(r));

  SampleRows s;
  const Index ne = ds.n_entities(), ny = ds.n_years();
  std::vector<double> yv;
  std::vector<double> xv;
  for (Index i = 0; i < ne; ++i)
    for (Index j = 0; j < ny; ++j) {
      double y = ycol(i, j);
      if (is_missing(y)) continue;
      bool ok = true;
      for (const Matd* c : xcols)
        if (is_missing((*c)(i, j))) {
          ok = false;
          break;
        }
      if (!ok) continue;
      s.entity.push_back(static_cast<int>(i));
      s.year.push_back(static_cast<int>(j));
      yv.push_back(y);
      for (const Matd* c : xcols) xv.push_back((*c)(i, j));
    }
  const Index n = static_cast<Index>(yv.size());
  const Index k = static_cast<Index>(xcols.size());
  s.y = Eigen::Map<Vecd>(yv.data(), n);
  s.X.resize(n, k);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < k; ++c) s.X(r, c) = xv[static_cast<std::size_t>(r * k + c)];
  return s;
}

}  // namespace

int FitResult::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < coef_names.size(); ++i)
    if (coef_names[i] == name) return static_cast<int>(i);
  return -1;
}

double FitResult::coef_of(const std::string& name) const {
  int i = index_of(name);
  require(i >= 0, ErrorCode::UnknownVariable, "no coefficient '" + name + "'");
  return coef[i];
}

double FitResult::se_of(const std::string& name) const {
  int i = index_of(name);
  require(i >= 0, ErrorCode::UnknownVariable, "no coefficient '" + name + "'");
  return se[i];
}

FitResult ols_fit(const Matd& X, const Vecd& y, const std::vector<std::string>& names) {
  require(static_cast<Index>(names.size()) == X.cols(), ErrorCode::InvalidSpec,
          "one name per design column required");
  auto k = ols_kernel<double>(X, y);

  FitResult fit;
  for (int idx : k.retained) fit.coef_names.push_back(names[static_cast<std::size_t>(idx)]);
  for (int idx : k.dropped) fit.dropped_columns.push_back(names[static_cast<std::size_t>(idx)]);
  fit.coef = k.coef;
  fit.nobs = static_cast<long>(k.nobs);
  fit.work.n_slopes = static_cast<long>(k.retained.size());
  fit.work.dof_used = fit.work.n_slopes;
  long dof = fit.nobs - fit.work.dof_used;
  double sigma2 = dof > 0 ? k.sse / static_cast<double>(dof) : missing();
  fit.vcov = sigma2 * k.xtx_inv;
  fit.se = sqrt_diag(fit.vcov);
  fit.residuals = k.residuals;
  fit.work.X.resize(X.rows(), static_cast<Index>(k.retained.size()));
  for (std::size_t c = 0; c < k.retained.size(); ++c)
    fit.work.X.col(static_cast<Index>(c)) = X.col(k.retained[c]);
  fit.work.resid = k.residuals;
  return fit;
}

FitResult twfe_fit(const PanelDataset& ds, const DesignSpec& spec, const TwfeOptions& opts) {
  require(spec.entity_effects && spec.year_effects, ErrorCode::InvalidSpec,
          "twfe_fit estimates both entity and year effects");
  SampleRows s = collect_rows(ds, spec);
  require(s.y.size() > 0, ErrorCode::EmptySample, "no complete rows for '" + spec.outcome + "'");

  std::set<int> ents(s.entity.begin(), s.entity.end());
  std::set<int> yrs(s.year.begin(), s.year.end());
  require(ents.size() >= 2 && yrs.size() >= 2, ErrorCode::DegenerateSample,
          "need at least 2 entities and 2 years after deletion");

  // Demean outcome and regressors together.
  const Index n = s.y.size();
  const Index k = s.X.cols();
  Matd data(n, k + 1);
  data.col(0) = s.y;
  if (k > 0) data.rightCols(k) = s.X;
  demean_two_way<double>(data, s.entity, s.year, static_cast<int>(ds.n_entities()),
                         static_cast<int>(ds.n_years()), opts.demean_tol);

  // Constant regressors vanish under the within transformation.
  std::vector<int> keep;
  std::vector<std::string> const_dropped;
  for (Index c = 0; c < k; ++c) {
    double scale = 1.0 + s.X.col(c).cwiseAbs().maxCoeff();
    if (data.col(c + 1).cwiseAbs().maxCoeff() <= 1e-9 * scale) {
      require(opts.drop_constant, ErrorCode::NoVariation,
              "regressor '" + spec.regressors[static_cast<std::size_t>(c)] +
                  "' has no within variation");
      const_dropped.push_back(spec.regressors[static_cast<std::size_t>(c)]);
    } else {
      keep.push_back(static_cast<int>(c));
    }
  }
  require(!keep.empty() || k == 0, ErrorCode::AllColumnsCollinear,
          "no regressor with within variation");

  Matd Xd(n, static_cast<Index>(keep.size()));
  std::vector<std::string> kept_names;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    Xd.col(static_cast<Index>(c)) = data.col(keep[c] + 1);
    kept_names.push_back(spec.regressors[static_cast<std::size_t>(keep[c])]);
  }
  Vecd yd = data.col(0);

  FitResult fit;
  fit.nobs = static_cast<long>(n);
  fit.dropped_columns = const_dropped;
  long absorbed = static_cast<long>(ents.size()) + static_cast<long>(yrs.size()) - 1;

  Vecd fitted_dm;
  if (Xd.cols() > 0) {
    auto kern = ols_kernel<double>(Xd, yd);
    for (int idx : kern.retained) fit.coef_names.push_back(kept_names[static_cast<std::size_t>(idx)]);
    for (int idx : kern.dropped) fit.dropped_columns.push_back(kept_names[static_cast<std::size_t>(idx)]);
    fit.coef = kern.coef;
    fit.work.n_slopes = static_cast<long>(kern.retained.size());
    fit.work.dof_used = fit.work.n_slopes + absorbed;
    long dof = fit.nobs - fit.work.dof_used;
    double sigma2 = dof > 0 ? kern.sse / static_cast<double>(dof) : missing();
    fit.vcov = sigma2 * kern.xtx_inv;
    fit.se = sqrt_diag(fit.vcov);
    fit.work.X.resize(n, static_cast<Index>(kern.retained.size()));
    for (std::size_t c = 0; c < kern.retained.size(); ++c)
      fit.work.X.col(static_cast<Index>(c)) = Xd.col(kern.retained[c]);
    fit.work.resid = kern.residuals;
    fitted_dm = fit.work.X * fit.coef;
  } else {
    fit.coef.resize(0);
    fit.se.resize(0);
    fit.vcov.resize(0, 0);
    fit.work.n_slopes = 0;
    fit.work.dof_used = absorbed;
    fit.work.X.resize(n, 0);
    fit.work.resid = yd;
    fitted_dm = Vecd::Zero(n);
  }
  fit.work.row_entity = s.entity;
  fit.work.row_year = s.year;

  // Residuals back onto the panel grid.
  fit.residuals = Matd::Constant(ds.n_entities(), ds.n_years(), missing());
  for (Index r = 0; r < n; ++r)
    fit.residuals(s.entity[static_cast<std::size_t>(r)], s.year[static_cast<std::size_t>(r)]) =
        fit.work.resid[r];

  // R-squared family. Fitted levels include the absorbed effects: y - resid.
  {
    Vecd y_dm = fitted_dm + fit.work.resid;
    double w = sq_corr(fitted_dm, y_dm);
    fit.r2_within = is_missing(w) ? 0.0 : w;

    Vecd fitted_lv = s.y - fit.work.resid;
    fit.r2_overall = sq_corr(fitted_lv, s.y);

    std::map<int, std::pair<double, double>> sums;  // entity -> (sum fitted, sum y)
    std::map<int, int> counts;
    for (Index r = 0; r < n; ++r) {
      int e = s.entity[static_cast<std::size_t>(r)];
      sums[e].first += fitted_lv[r];
      sums[e].second += s.y[r];
      counts[e] += 1;
    }
    Vecd mf(static_cast<Index>(sums.size())), my(static_cast<Index>(sums.size()));
    Index i = 0;
    for (const auto& [e, sm] : sums) {
      mf[i] = sm.first / counts[e];
      my[i] = sm.second / counts[e];
      ++i;
    }
    fit.r2_between = sq_corr(mf, my);

    long denom = fit.nobs - fit.work.dof_used - 1;
    fit.r2_adjusted = denom > 0 ? 1.0 - (1.0 - fit.r2_within) *
                                            static_cast<double>(fit.nobs - 1) /
                                            static_cast<double>(denom)
                                : missing();
  }

  if (!spec.cluster.empty()) apply_cluster_vcov(fit, ClusterSpec::resolve(ds, spec.cluster));
  return fit;
}

ClusterSpec ClusterSpec::by_entity(Index n_entities) {
  ClusterSpec cs;
  cs.cluster_of_entity.resize(static_cast<std::size_t>(n_entities));
  for (Index i = 0; i < n_entities; ++i) cs.cluster_of_entity[static_cast<std::size_t>(i)] = static_cast<int>(i);
  cs.n_clusters = static_cast<int>(n_entities);
  return cs;
}

ClusterSpec ClusterSpec::resolve(const PanelDataset& ds, const std::string& name) {
  if (name == "entity") return by_entity(ds.n_entities());

  std::vector<std::string> labels(static_cast<std::size_t>(ds.n_entities()));
  if (ds.meta.count(name)) {
    labels = ds.meta.at(name);
  } else if (ds.has_column(name)) {
    const Matd& col = ds.column(name);
    for (Index i = 0; i < ds.n_entities(); ++i) {
      double v = missing();
      for (Index j = 0; j < ds.n_years(); ++j) {
        if (is_missing(col(i, j))) continue;
        if (is_missing(v)) {
          v = col(i, j);
        } else {
          require(col(i, j) == v, ErrorCode::InvalidSpec,
                  "cluster column '" + name + "' varies over time for entity '" +
                      ds.entities[static_cast<std::size_t>(i)] + "'");
        }
      }
      labels[static_cast<std::size_t>(i)] = is_missing(v) ? std::string() : format_number(v, 17);
    }
  } else {
    raise(ErrorCode::UnknownVariable, "no cluster attribute or column '" + name + "'");
  }

  std::map<std::string, int> ids;
  for (const auto& l : labels)
    if (!l.empty()) ids.emplace(l, 0);
  int next = 0;
  for (auto& [l, id] : ids) id = next++;

  ClusterSpec cs;
  cs.n_clusters = next;
  cs.cluster_of_entity.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    cs.cluster_of_entity[i] = labels[i].empty() ? -1 : ids[labels[i]];
  return cs;
}

Matd cr1_vcov(const Matd& X, const Vecd& resid, const std::vector<int>& cluster_of_row,
              long k_params) {
  const Index n = X.rows();
  const Index k = X.cols();
  require(n == resid.size() && static_cast<std::size_t>(n) == cluster_of_row.size(),
          ErrorCode::InvalidSpec, "cluster pieces misaligned");

  std::map<int, Vecd> scores;
  for (Index r = 0; r < n; ++r) {
    int g = cluster_of_row[static_cast<std::size_t>(r)];
    require(g >= 0, ErrorCode::InvalidSpec, "sample row without cluster id");
    auto [it, inserted] = scores.try_emplace(g, Vecd::Zero(k));
    it->second += X.row(r).transpose() * resid[r];
  }
  const long G = static_cast<long>(scores.size());
  require(G >= 2, ErrorCode::SingleCluster, "at least 2 clusters required");

  Matd meat = Matd::Zero(k, k);
  for (const auto& [g, sgrad] : scores) meat += sgrad * sgrad.transpose();

  Matd xtx_inv = (X.transpose() * X).ldlt().solve(Matd::Identity(k, k));
  double c = (static_cast<double>(G) / static_cast<double>(G - 1)) *
             (static_cast<double>(n - 1) / static_cast<double>(n - k_params));
  return c * xtx_inv * meat * xtx_inv;
}

void apply_cluster_vcov(FitResult& fit, const ClusterSpec& clusters) {
  require(!fit.work.row_entity.empty(), ErrorCode::InvalidSpec,
          "fit carries no panel rows to cluster on");
  std::vector<int> row_cluster(fit.work.row_entity.size());
  for (std::size_t r = 0; r < row_cluster.size(); ++r) {
    int e = fit.work.row_entity[r];
    require(e >= 0 && static_cast<std::size_t>(e) < clusters.cluster_of_entity.size(),
            ErrorCode::InvalidSpec, "cluster assignment misses an entity");
    row_cluster[r] = clusters.cluster_of_entity[static_cast<std::size_t>(e)];
  }
  if (fit.work.X.cols() == 0) return;
  fit.vcov = cr1_vcov(fit.work.X, fit.work.resid, row_cluster, fit.work.n_slopes);
  fit.se = sqrt_diag(fit.vcov);
}

R2Suite r2_suite(const FitResult& fit, const PanelDataset& ds, const DesignSpec& spec) {
  const Matd& ycol = ds.column(spec.outcome);
  const Index n = static_cast<Index>(fit.work.row_entity.size());
  require(n > 0, ErrorCode::InvalidSpec, "fit carries no panel rows");

  Vecd y(n);
  for (Index r = 0; r < n; ++r)
    y[r] = ycol(fit.work.row_entity[static_cast<std::size_t>(r)],
                fit.work.row_year[static_cast<std::size_t>(r)]);

  Vecd fitted_dm = fit.work.X.cols() > 0 ? Vecd(fit.work.X * fit.coef) : Vecd(Vecd::Zero(n));
  Vecd y_dm = fitted_dm + fit.work.resid;
  Vecd fitted_lv = y - fit.work.resid;

  R2Suite out{};
  double w = sq_corr(fitted_dm, y_dm);
  out.within = is_missing(w) ? 0.0 : w;
  out.overall = sq_corr(fitted_lv, y);

  std::map<int, std::pair<double, double>> sums;
  std::map<int, int> counts;
  for (Index r = 0; r < n; ++r) {
    int e = fit.work.row_entity[static_cast<std::size_t>(r)];
    sums[e].first += fitted_lv[r];
    sums[e].second += y[r];
    counts[e] += 1;
  }
  Vecd mf(static_cast<Index>(sums.size())), my(static_cast<Index>(sums.size()));
  Index i = 0;
  for (const auto& [e, sm] : sums) {
    mf[i] = sm.first / counts[e];
    my[i] = sm.second / counts[e];
    ++i;
  }
  out.between = sq_corr(mf, my);

  long denom = fit.nobs - fit.work.dof_used - 1;
  out.adjusted = denom > 0 ? 1.0 - (1.0 - out.within) * static_cast<double>(fit.nobs - 1) /
                                       static_cast<double>(denom)
                           : missing();
  return out;
}

namespace {

double logit_loglik(const Vecd& eta, const Vecd& y) {
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    // y*eta - log(1 + exp(eta)), computed stably for large |eta|
    double e = eta[i];
    double log1pexp = e > 30.0 ? e : std::log1p(std::exp(e));
    ll += y[i] * e - log1pexp;
  }
  return ll;
}

}  // namespace

FitResult logit_fit_raw(const Matd& X, const Vecd& y, const std::vector<std::string>& names) {
  const Index n = X.rows();
  require(n > 0, ErrorCode::EmptySample, "no rows");
  for (Index i = 0; i < n; ++i)
    require(y[i] == 0.0 || y[i] == 1.0, ErrorCode::NonBinaryOutcome,
            "outcome must be 0/1, found " + format_number(y[i]));

  // Rank-filter the design up front so Newton works on independent columns.
  Matd probe = X;
  auto filter = ols_kernel<double>(probe, Vecd::Zero(n));
  Matd Xr(n, static_cast<Index>(filter.retained.size()));
  std::vector<std::string> kept;
  for (std::size_t c = 0; c < filter.retained.size(); ++c) {
    Xr.col(static_cast<Index>(c)) = X.col(filter.retained[c]);
    kept.push_back(names[static_cast<std::size_t>(filter.retained[c])]);
  }
  const Index k = Xr.cols();

  Vecd beta = Vecd::Zero(k);
  Vecd p(n), wdiag(n);
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    Vecd eta = Xr * beta;
    for (Index i = 0; i < n; ++i) p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    Vecd grad = Xr.transpose() * (y - p);
    if (grad.cwiseAbs().maxCoeff() < 1e-8) {
      converged = true;
      break;
    }
    for (Index i = 0; i < n; ++i) wdiag[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
    Matd H = Xr.transpose() * wdiag.asDiagonal() * Xr;
    beta += H.ldlt().solve(grad);
    require(beta.cwiseAbs().maxCoeff() <= 30.0, ErrorCode::PerfectSeparation,
            "coefficient diverged during Newton iteration");
  }
  require(converged, ErrorCode::NoConvergence, "logit did not converge in 100 iterations");

  Vecd eta = Xr * beta;
  for (Index i = 0; i < n; ++i) p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
  for (Index i = 0; i < n; ++i) wdiag[i] = p[i] * (1.0 - p[i]);
  Matd A = Xr.transpose() * wdiag.asDiagonal() * Xr;
  Matd A_inv = A.ldlt().solve(Matd::Identity(k, k));
  Vecd u = y - p;
  Matd B = Xr.transpose() * u.array().square().matrix().asDiagonal() * Xr;
  double hc1 = static_cast<double>(n) / static_cast<double>(n - k);

  FitResult fit;
  fit.coef_names = kept;
  for (int idx : filter.dropped) fit.dropped_columns.push_back(names[static_cast<std::size_t>(idx)]);
  fit.coef = beta;
  fit.vcov = hc1 * A_inv * B * A_inv;
  fit.se = sqrt_diag(fit.vcov);
  fit.nobs = static_cast<long>(n);
  fit.residuals = u;
  fit.work.X = Xr;
  fit.work.resid = u;
  fit.work.n_slopes = static_cast<long>(k);
  fit.work.dof_used = static_cast<long>(k);

  double ll = logit_loglik(eta, y);
  double pbar = y.mean();
  double ll0 = static_cast<double>(n) *
               (pbar * std::log(pbar) + (1.0 - pbar) * std::log(1.0 - pbar));
  fit.r2_pseudo = ll0 != 0.0 ? 1.0 - ll / ll0 : missing();
  return fit;
}

FitResult logit_fit(const PanelDataset& ds, const DesignSpec& spec) {
  SampleRows s = collect_rows(ds, spec);
  require(s.y.size() > 0, ErrorCode::EmptySample, "no complete rows for '" + spec.outcome + "'");

  const Index n = s.y.size();
  Matd X(n, s.X.cols() + 1);
  X.col(0).setOnes();
  if (s.X.cols() > 0) X.rightCols(s.X.cols()) = s.X;
  std::vector<std::string> names{"_cons"};
  names.insert(names.end(), spec.regressors.begin(), spec.regressors.end());

  FitResult fit = logit_fit_raw(X, s.y, names);
  fit.work.row_entity = s.entity;
  fit.work.row_year = s.year;
  Matd grid = Matd::Constant(ds.n_entities(), ds.n_years(), missing());
  for (Index r = 0; r < n; ++r)
    grid(s.entity[static_cast<std::size_t>(r)], s.year[static_cast<std::size_t>(r)]) =
        fit.work.resid[r];
  fit.residuals = grid;
  return fit;
}

}  // namespace paneval
