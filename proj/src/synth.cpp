#include "paneval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "paneval/did.hpp"
#include "paneval/spatial.hpp"

namespace paneval {

namespace {

// Stream ids for the counter RNG.
constexpr std::uint64_t kStreamEntityFe = 1;
constexpr std::uint64_t kStreamYearFe = 2;
constexpr std::uint64_t kStreamNoise = 3;
constexpr std::uint64_t kStreamModerator = 4;
constexpr std::uint64_t kStreamControl = 5;

void validate(const DgpSpec& spec) {
  require(spec.n_entities >= 1 && spec.n_years >= 1, ErrorCode::InvalidSpec,
          "need at least one entity and one year");
  require(spec.entity_fe_sd >= 0 && spec.year_fe_sd >= 0 && spec.noise_sd >= 0,
          ErrorCode::InvalidSpec, "standard deviations must be non-negative");
  require(spec.rho > -1.0 && spec.rho < 1.0, ErrorCode::InvalidSpec,
          "rho must lie in (-1, 1)");
  require(spec.serial_corr > -1.0 && spec.serial_corr < 1.0, ErrorCode::InvalidSpec,
          "serial correlation must lie in (-1, 1)");
  require(spec.lag >= 0, ErrorCode::InvalidSpec, "lag must be >= 0");
  double total = 0.0;
  for (const auto& [year, frac] : spec.cohort_fractions) {
    require(frac >= 0.0, ErrorCode::InvalidSpec, "cohort fractions must be non-negative");
    total += frac;
  }
  require(total <= 1.0 + 1e-9, ErrorCode::InvalidSpec,
          "cohort fractions exceed 1; the remainder is the never-treated share");
}

/// Deterministic block assignment: entity index -> event year (or none).
std::map<std::string, int> assign_cohorts(const DgpSpec& spec,
                                          const std::vector<std::string>& entities) {
  std::map<std::string, int> events;
  double cum = 0.0;
  int start = 0;
  for (const auto& [year, frac] : spec.cohort_fractions) {
    cum += frac;
    int end = static_cast<int>(std::llround(cum * spec.n_entities));
    end = std::min(end, spec.n_entities);
    for (int i = start; i < end; ++i) events[entities[static_cast<std::size_t>(i)]] = year;
    start = std::max(start, end);
  }
  return events;
}

/// AR(1) noise path for one entity, built from white counter draws.
void fill_noise(const DgpSpec& spec, int entity, Eigen::Ref<Eigen::RowVectorXd> row) {
  double prev = 0.0;
  for (int t = 0; t < spec.n_years; ++t) {
    double w = spec.noise_sd * gaussian(rng_key(spec.seed, static_cast<std::uint64_t>(entity),
                                                static_cast<std::uint64_t>(t), kStreamNoise));
    double e = spec.serial_corr * prev + w;
    row(t) = e;
    prev = e;
  }
}

}  // namespace

SimulatedPanel simulate_did(const DgpSpec& spec) {
  validate(spec);
  SimulatedPanel sim;
  auto entities = synthetic_entity_names(spec.n_entities);
  sim.events = assign_cohorts(spec, entities);

  PanelDataset& ds = sim.ds;
  ds.entities = entities;
  ds.first_year = spec.first_year;
  ds.last_year = spec.first_year + spec.n_years - 1;

  const Index ne = ds.n_entities();
  const Index ny = ds.n_years();
  Matd y(ne, ny);
  Matd mod;
  const bool has_mod = spec.interaction.has_value();
  if (has_mod) mod.resize(ne, ny);

  std::vector<double> lambda(static_cast<std::size_t>(ny));
  for (Index t = 0; t < ny; ++t)
    lambda[static_cast<std::size_t>(t)] =
        spec.year_fe_sd *
        gaussian(rng_key(spec.seed, static_cast<std::uint64_t>(t), 0, kStreamYearFe));

  Eigen::RowVectorXd noise(ny);
  for (Index i = 0; i < ne; ++i) {
    double alpha = spec.entity_fe_sd *
                   gaussian(rng_key(spec.seed, static_cast<std::uint64_t>(i), 0, kStreamEntityFe));
    fill_noise(spec, static_cast<int>(i), noise);

    auto ev = sim.events.find(entities[static_cast<std::size_t>(i)]);
    const bool treated = ev != sim.events.end();
    const int onset = treated ? ev->second + spec.lag : 0;
    double tau = spec.delta;
    if (treated) {
      auto het = spec.effect_heterogeneity.find(ev->second);
      if (het != spec.effect_heterogeneity.end()) tau = het->second;
    }

    for (Index t = 0; t < ny; ++t) {
      int year = ds.year_at(t);
      double d = (treated && year >= onset) ? 1.0 : 0.0;
      double base = alpha + lambda[static_cast<std::size_t>(t)] + tau * d + noise(t);
      double pre = (treated && spec.pre_trend != 0.0 && year < onset)
                       ? spec.pre_trend * static_cast<double>(year - onset)
                       : 0.0;
      double inter = 0.0;
      if (has_mod) {
        double m = gaussian(rng_key(spec.seed, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(t), kStreamModerator));
        mod(i, t) = m;
        inter = spec.interaction->second * m * d;
      }
      y(i, t) = base + pre + inter;
    }
  }

  ds.add_column("y", std::move(y));
  if (has_mod) ds.add_column(spec.interaction->first, std::move(mod));
  return sim;
}

SimulatedPanel simulate_sdm(const DgpSpec& spec, const SpatialWeights& W, bool with_controls) {
  validate(spec);
  require(static_cast<Index>(spec.n_entities) == W.W.rows(), ErrorCode::InvalidSpec,
          "weight matrix size does not match n_entities");

  SimulatedPanel sim;
  auto entities = synthetic_entity_names(spec.n_entities);
  sim.events = assign_cohorts(spec, entities);

  PanelDataset& ds = sim.ds;
  ds.entities = entities;
  ds.first_year = spec.first_year;
  ds.last_year = spec.first_year + spec.n_years - 1;

  const Index ne = ds.n_entities();
  const Index ny = ds.n_years();
  constexpr double kBeta = 1.0;
  constexpr double kGamma = 0.5;

  Matd x1;
  if (with_controls) {
    x1.resize(ne, ny);
    for (Index i = 0; i < ne; ++i)
      for (Index t = 0; t < ny; ++t)
        x1(i, t) = gaussian(rng_key(spec.seed, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(t), kStreamControl));
  }

  // Structural right-hand side, assembled per cell in the same order as
  // simulate_did so the rho = 0, no-controls case matches it bitwise.
  Matd rhs(ne, ny);
  Eigen::RowVectorXd noise(ny);
  std::vector<double> lambda(static_cast<std::size_t>(ny));
  for (Index t = 0; t < ny; ++t)
    lambda[static_cast<std::size_t>(t)] =
        spec.year_fe_sd *
        gaussian(rng_key(spec.seed, static_cast<std::uint64_t>(t), 0, kStreamYearFe));
  Matd wx1;
  if (with_controls) wx1 = W.W * x1;
  for (Index i = 0; i < ne; ++i) {
    double alpha = spec.entity_fe_sd *
                   gaussian(rng_key(spec.seed, static_cast<std::uint64_t>(i), 0, kStreamEntityFe));
    fill_noise(spec, static_cast<int>(i), noise);
    auto ev = sim.events.find(entities[static_cast<std::size_t>(i)]);
    const bool treated = ev != sim.events.end();
    const int onset = treated ? ev->second + spec.lag : 0;
    for (Index t = 0; t < ny; ++t) {
      double d = (treated && ds.year_at(t) >= onset) ? 1.0 : 0.0;
      double base = alpha + lambda[static_cast<std::size_t>(t)] + spec.delta * d + noise(t);
      if (with_controls) base += kBeta * x1(i, t) + kGamma * wx1(i, t);
      rhs(i, t) = base;
    }
  }

  Matd y;
  if (spec.rho == 0.0) {
    y = rhs;
  } else {
    if (std::abs(spec.rho) >= 0.99)
      sim.warnings.push_back("near-singular system: |rho| = " +
                             format_number(std::abs(spec.rho), 6));
    Matd A = Matd::Identity(ne, ne) - spec.rho * W.W;
    Eigen::FullPivLU<Matd> lu(A);
    require(lu.isInvertible(), ErrorCode::SingularSystem,
            "I - rho W is singular at rho = " + format_number(spec.rho, 10));
    y = lu.solve(rhs);
  }

  ds.add_column("y", std::move(y));
  if (with_controls) ds.add_column("x1", std::move(x1));
  return sim;
}

std::vector<std::string> synthetic_entity_names(int n) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  char buf[16];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "e%04d", i + 1);
    out.emplace_back(buf);
  }
  return out;
}

FitResult oracle_dummy_ols(const PanelDataset& ds, const DesignSpec& spec) {
  require(ds.n_entities() * ds.n_years() <= 5000, ErrorCode::TooLarge,
          "oracle_dummy_ols is for small panels only");
  const Matd& ycol = ds.column(spec.outcome);
  std::vector<const Matd*> xcols;
  for (const auto& r : spec.regressors) xcols.push_back(&ds.column(r));

  std::vector<int> row_entity, row_year;
  std::vector<double> yv;
  for (Index i = 0; i < ds.n_entities(); ++i)
    for (Index j = 0; j < ds.n_years(); ++j) {
      if (is_missing(ycol(i, j))) continue;
      bool ok = true;
      for (const Matd* c : xcols)
        if (is_missing((*c)(i, j))) {
          ok = false;
          break;
        }
      if (!ok) continue;
      row_entity.push_back(static_cast<int>(i));
      row_year.push_back(static_cast<int>(j));
      yv.push_back(ycol(i, j));
    }
  const Index n = static_cast<Index>(yv.size());
  require(n > 0, ErrorCode::EmptySample, "no complete rows");

  std::set<int> ents(row_entity.begin(), row_entity.end());
  std::set<int> yrs(row_year.begin(), row_year.end());
  require(ents.size() >= 2 && yrs.size() >= 2, ErrorCode::DegenerateSample,
          "need at least 2 entities and 2 years");

  // Intercept, entity dummies (first distinct entity omitted), year dummies
  // (first distinct year omitted), then the regressors.
  std::vector<int> ent_list(ents.begin(), ents.end());
  std::vector<int> yr_list(yrs.begin(), yrs.end());
  const Index k = 1 + static_cast<Index>(ent_list.size() - 1) +
                  static_cast<Index>(yr_list.size() - 1) + static_cast<Index>(xcols.size());
  Matd X = Matd::Zero(n, k);
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(k));
  names.emplace_back("_cons");
  for (std::size_t e = 1; e < ent_list.size(); ++e)
    names.push_back("fe_e_" + ds.entities[static_cast<std::size_t>(ent_list[e])]);
  for (std::size_t t = 1; t < yr_list.size(); ++t)
    names.push_back("fe_y_" + std::to_string(ds.first_year + yr_list[t]));
  for (const auto& r : spec.regressors) names.push_back(r);

  for (Index row = 0; row < n; ++row) {
    X(row, 0) = 1.0;
    Index c = 1;
    for (std::size_t e = 1; e < ent_list.size(); ++e, ++c)
      if (row_entity[static_cast<std::size_t>(row)] == ent_list[e]) X(row, c) = 1.0;
    for (std::size_t t = 1; t < yr_list.size(); ++t, ++c)
      if (row_year[static_cast<std::size_t>(row)] == yr_list[t]) X(row, c) = 1.0;
    for (const Matd* xc : xcols) {
      X(row, c) = (*xc)(row_entity[static_cast<std::size_t>(row)],
                        row_year[static_cast<std::size_t>(row)]);
      ++c;
    }
  }

  Vecd y = Eigen::Map<Vecd>(yv.data(), n);
  FitResult fit = ols_fit(X, y, names);
  fit.work.row_entity = row_entity;
  fit.work.row_year = row_year;
  return fit;
}

}  // namespace paneval
