#include "paneval/did.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "paneval/parallel.hpp"

namespace paneval {

TreatmentSchedule TreatmentSchedule::from_rows(
    const std::vector<std::pair<std::string, int>>& rows) {
  TreatmentSchedule s;
  for (const auto& [entity, year] : rows) {
    s.all_event_years[entity].push_back(year);
    auto it = s.first_event_year.find(entity);
    if (it == s.first_event_year.end() || year < it->second) s.first_event_year[entity] = year;
  }
  return s;
}

TreatmentSchedule load_schedule(const std::string& path) {
  CsvTable table = read_csv(path);
  require(table.header.size() == 2 && table.header[0] == "entity" &&
              table.header[1] == "event_year",
          ErrorCode::RaggedHeader, path + ": header must be 'entity,event_year'");
  std::vector<std::pair<std::string, int>> rows;
  rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    require(!table.rows[r][0].empty(), ErrorCode::NonNumericValue,
            path + ": empty entity at row " + std::to_string(r + 1));
    rows.emplace_back(table.rows[r][0],
                      static_cast<int>(parse_integer(table.rows[r][1], r + 1, "event_year")));
  }
  return TreatmentSchedule::from_rows(rows);
}

TreatmentBuild build_treatment(const TreatmentSchedule& schedule,
                               const std::vector<std::string>& entities, int first_year,
                               int last_year, int lag, std::optional<int> drop_treated_before) {
  require(lag >= 0, ErrorCode::InvalidSpec, "lag must be >= 0");
  require(last_year >= first_year, ErrorCode::InvalidSpec, "empty year range");

  TreatmentBuild out;
  std::vector<std::string> kept;
  for (const auto& e : entities) {
    auto ev = schedule.event_year(e);
    if (ev && drop_treated_before && *ev < *drop_treated_before) {
      out.excluded.push_back(e);
    } else {
      kept.push_back(e);
    }
  }

  const Index ny = static_cast<Index>(last_year - first_year + 1);
  TreatmentPanel& tp = out.panel;
  tp.entities = kept;
  tp.first_year = first_year;
  tp.lag = lag;
  tp.D = Matd::Zero(static_cast<Index>(kept.size()), ny);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    auto ev = schedule.event_year(kept[i]);
    if (!ev) continue;
    auto all = schedule.all_event_years.find(kept[i]);
    if (all != schedule.all_event_years.end() && all->second.size() > 1) tp.collapsed = true;
    int onset = *ev + lag;
    for (Index j = 0; j < ny; ++j)
      if (first_year + static_cast<int>(j) >= onset) tp.D(static_cast<Index>(i), j) = 1.0;
  }
  return out;
}

DidSetup prepare_did(const PanelDataset& ds, const TreatmentSchedule& schedule, int lag,
                     std::optional<int> drop_treated_before) {
  TreatmentBuild build = build_treatment(schedule, ds.entities, ds.first_year, ds.last_year,
                                         lag, drop_treated_before);
  DidSetup setup;
  setup.excluded = build.excluded;
  setup.treatment = std::move(build.panel);
  setup.ds = build.excluded.empty() ? ds : keep_entities(ds, setup.treatment.entities);
  return setup;
}

PanelDataset with_treatment_column(const PanelDataset& ds, const TreatmentPanel& treatment) {
  require(treatment.entities == ds.entities && treatment.first_year == ds.first_year &&
              treatment.D.cols() == ds.n_years(),
          ErrorCode::InvalidSpec, "treatment panel is not aligned with the dataset");
  PanelDataset out = ds;
  out.add_column(kTreatmentName, treatment.D);
  return out;
}

FitResult att_estimate(const PanelDataset& ds, const TreatmentPanel& treatment,
                       const std::string& outcome, const std::vector<std::string>& controls,
                       const std::string& cluster) {
  PanelDataset with_d = with_treatment_column(ds, treatment);
  DesignSpec spec;
  spec.outcome = outcome;
  spec.regressors.push_back(kTreatmentName);
  spec.regressors.insert(spec.regressors.end(), controls.begin(), controls.end());
  spec.cluster = cluster;
  return twfe_fit(with_d, spec);
}

EventStudyResult event_study(const PanelDataset& ds, const TreatmentSchedule& schedule,
                             const std::string& outcome, const std::vector<std::string>& controls,
                             std::pair<int, int> window, const std::string& cluster, int lag) {
  const auto [lo, hi] = window;
  require(lo <= -1 && hi >= 0, ErrorCode::InvalidSpec,
          "window must contain the reference -1 and 0");

  bool any_never = false;
  for (const auto& e : ds.entities)
    if (!schedule.event_year(e)) any_never = true;
  require(any_never, ErrorCode::InvalidSpec,
          "event study needs never-treated entities as the comparison anchor");

  // One indicator per relative time in the window, reference omitted;
  // endpoints accumulate everything at or beyond them.
  const Index ne = ds.n_entities(), ny = ds.n_years();
  PanelDataset work = ds;
  std::vector<int> ks;
  std::vector<std::string> knames;
  std::vector<int> missing_ks;
  for (int k = lo; k <= hi; ++k) {
    if (k == -1) continue;
    Matd col = Matd::Zero(ne, ny);
    bool any = false;
    for (Index i = 0; i < ne; ++i) {
      auto ev = schedule.event_year(ds.entities[static_cast<std::size_t>(i)]);
      if (!ev) continue;
      int onset = *ev + lag;
      for (Index j = 0; j < ny; ++j) {
        int rel = ds.year_at(j) - onset;
        int binned = std::clamp(rel, lo, hi);
        if (binned == k) {
          col(i, j) = 1.0;
          any = true;
        }
      }
    }
    if (!any) {
      missing_ks.push_back(k);  // EmptyCohort: reported, not fatal
      continue;
    }
    std::string name = "rel_" + std::to_string(k);
    work.add_column(name, std::move(col));
    ks.push_back(k);
    knames.push_back(name);
  }

  DesignSpec spec;
  spec.outcome = outcome;
  spec.regressors = knames;
  spec.regressors.insert(spec.regressors.end(), controls.begin(), controls.end());
  spec.cluster = cluster;
  TwfeOptions opts;
  opts.drop_constant = true;  // a k can lose variation after listwise deletion
  EventStudyResult out;
  out.fit = twfe_fit(work, spec, opts);
  out.window = window;
  out.reference_period = -1;
  out.binned_endpoints = true;
  out.coef_se[-1] = {0.0, 0.0};
  for (std::size_t idx = 0; idx < ks.size(); ++idx) {
    int pos = out.fit.index_of(knames[idx]);
    if (pos < 0) {
      missing_ks.push_back(ks[idx]);
      continue;
    }
    out.coef_se[ks[idx]] = {out.fit.coef[pos], out.fit.se[pos]};
  }
  std::sort(missing_ks.begin(), missing_ks.end());
  out.missing = std::move(missing_ks);
  return out;
}

const char* placebo_mode_name(PlaceboMode m) {
  switch (m) {
    case PlaceboMode::PermuteEntities: return "permute-entities";
    case PlaceboMode::PermuteYears: return "permute-years";
    case PlaceboMode::PermuteBoth: return "permute-both";
  }
  return "permute-both";
}

PlaceboMode placebo_mode_from(const std::string& name) {
  if (name == "permute-entities") return PlaceboMode::PermuteEntities;
  if (name == "permute-years") return PlaceboMode::PermuteYears;
  if (name == "permute-both") return PlaceboMode::PermuteBoth;
  raise(ErrorCode::InvalidSpec, "unknown placebo mode '" + name + "'");
}

namespace {

// Fisher-Yates driven by the counter RNG; depends only on (seed, rep).
std::vector<std::size_t> rep_permutation(std::size_t n, std::uint64_t seed, std::uint64_t rep,
                                         std::uint64_t stream) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::uint64_t key = rng_key(seed, rep, stream, i);
    std::size_t j = static_cast<std::size_t>(uniform01(key) * static_cast<double>(i));
    if (j >= i) j = i - 1;
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

TreatmentSchedule pseudo_schedule(const std::vector<std::string>& entities,
                                  const std::vector<std::string>& treated,
                                  const std::vector<int>& years_sorted, PlaceboMode mode,
                                  std::uint64_t seed, std::uint64_t rep) {
  std::vector<std::pair<std::string, int>> rows;
  const std::size_t m = treated.size();
  switch (mode) {
    case PlaceboMode::PermuteEntities: {
      // New treated set, event years assigned in sorted order.
      auto perm = rep_permutation(entities.size(), seed, rep, 1);
      std::vector<std::size_t> chosen(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
      std::sort(chosen.begin(), chosen.end());
      for (std::size_t i = 0; i < m; ++i)
        rows.emplace_back(entities[chosen[i]], years_sorted[i]);
      break;
    }
    case PlaceboMode::PermuteYears: {
      // Same treated set, years shuffled among them.
      auto perm = rep_permutation(m, seed, rep, 2);
      for (std::size_t i = 0; i < m; ++i) rows.emplace_back(treated[i], years_sorted[perm[i]]);
      break;
    }
    case PlaceboMode::PermuteBoth: {
      auto eperm = rep_permutation(entities.size(), seed, rep, 1);
      auto yperm = rep_permutation(m, seed, rep, 2);
      for (std::size_t i = 0; i < m; ++i)
        rows.emplace_back(entities[eperm[i]], years_sorted[yperm[i]]);
      break;
    }
  }
  return TreatmentSchedule::from_rows(rows);
}

}  // namespace

PlaceboResult placebo(const PanelDataset& ds, const TreatmentSchedule& schedule,
                      const std::string& outcome, const std::vector<std::string>& controls,
                      int n_reps, std::uint64_t seed, PlaceboMode mode, int lag, int threads) {
  require(n_reps >= 1, ErrorCode::InvalidSpec, "n_reps must be >= 1");

  std::vector<std::string> treated;
  std::vector<int> years;
  for (const auto& e : ds.entities) {
    auto ev = schedule.event_year(e);
    if (ev) {
      treated.push_back(e);
      years.push_back(*ev);
    }
  }
  require(!treated.empty(), ErrorCode::InvalidSpec, "no treated entities to permute");
  std::sort(years.begin(), years.end());

  PlaceboResult out;
  out.seed = seed;
  out.mode = mode;
  {
    TreatmentBuild base = build_treatment(schedule, ds.entities, ds.first_year, ds.last_year, lag);
    out.observed = att_estimate(ds, base.panel, outcome, controls).coef_of(kTreatmentName);
  }

  out.draws.assign(static_cast<std::size_t>(n_reps), missing());
  parallel_for(n_reps, threads, [&](std::int64_t rep) {
    TreatmentSchedule pseudo = pseudo_schedule(ds.entities, treated, years, mode, seed,
                                               static_cast<std::uint64_t>(rep));
    TreatmentBuild build =
        build_treatment(pseudo, ds.entities, ds.first_year, ds.last_year, lag);
    out.draws[static_cast<std::size_t>(rep)] =
        att_estimate(ds, build.panel, outcome, controls).coef_of(kTreatmentName);
  });

  long hits = 0;
  for (double d : out.draws)
    if (std::abs(d) >= std::abs(out.observed)) ++hits;
  out.p_value = static_cast<double>(hits) / static_cast<double>(n_reps);
  return out;
}

FitResult selection_test(const PanelDataset& ds, const std::string& status_column,
                         const std::vector<std::string>& predictors) {
  DesignSpec spec;
  spec.outcome = status_column;
  spec.regressors = predictors;
  spec.entity_effects = false;
  spec.year_effects = false;
  return logit_fit(ds, spec);
}

FitResult moderation_fit(const PanelDataset& ds, const TreatmentPanel& treatment,
                         const std::string& outcome, const ModerationSpec& mspec,
                         const std::vector<std::string>& controls, const std::string& cluster) {
  require(mspec.moderator != kTreatmentName, ErrorCode::InvalidSpec,
          "the treatment dummy cannot moderate itself");
  PanelDataset work = with_treatment_column(ds, treatment);
  const Matd& mcol = work.column(mspec.moderator);

  Matd m = mcol;
  if (mspec.center) {
    double sum = 0.0;
    long cnt = 0;
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (!is_missing(m(i, j))) {
          sum += m(i, j);
          ++cnt;
        }
    require(cnt > 0, ErrorCode::EmptySample, "moderator has no observed cells");
    double mean = sum / static_cast<double>(cnt);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (!is_missing(m(i, j))) m(i, j) -= mean;
  }

  const Matd& d = work.column(kTreatmentName);
  Matd inter = Matd::Constant(m.rows(), m.cols(), missing());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (!is_missing(m(i, j))) inter(i, j) = d(i, j) * m(i, j);

  std::string mod_name = mspec.center ? mspec.moderator + "_centered" : mspec.moderator;
  std::string inter_name = std::string(kTreatmentName) + "_" + mspec.moderator;
  if (mspec.center) work.add_column(mod_name, std::move(m));
  work.add_column(inter_name, std::move(inter));

  DesignSpec spec;
  spec.outcome = outcome;
  spec.regressors = {kTreatmentName, mod_name, inter_name};
  spec.regressors.insert(spec.regressors.end(), controls.begin(), controls.end());
  spec.cluster = cluster;
  return twfe_fit(work, spec);
}

}  // namespace paneval
