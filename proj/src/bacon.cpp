#include "paneval/bacon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace paneval {

const char* bacon_category_name(BaconCategory c) {
  switch (c) {
    case BaconCategory::TimingGroups: return "Timing groups";
    case BaconCategory::TimingVsAlways: return "Timing vs always treated";
    case BaconCategory::NeverVsTiming: return "Never treated vs timing";
    case BaconCategory::NeverVsAlways: return "Never treated vs always treated";
    case BaconCategory::WithinGroup: return "Within group";
  }
  return "";
}

namespace {

struct PairStat {
  double estimate = 0.0;
  double raw_weight = 0.0;  // cells * within sum of squares of the treatment path
  bool defined = false;
};

/// 2x2 statistic on the subsample (units_a + units_b) x [j0, j1]: double
/// within-demeaning of V and O (exact for this balanced block), then
/// estimate = <O~,V~>/<V~,V~> and raw weight = N_S * <V~,V~>.
PairStat pair_stat(const Matd& V, const Matd& O, const std::vector<Index>& units_a,
                   const std::vector<Index>& units_b, Index j0, Index j1) {
  std::vector<Index> units(units_a);
  units.insert(units.end(), units_b.begin(), units_b.end());
  const Index nu = static_cast<Index>(units.size());
  const Index nt = j1 - j0 + 1;

  Matd v(nu, nt), o(nu, nt);
  for (Index r = 0; r < nu; ++r) {
    v.row(r) = V.row(units[static_cast<std::size_t>(r)]).segment(j0, nt);
    o.row(r) = O.row(units[static_cast<std::size_t>(r)]).segment(j0, nt);
  }
  v.colwise() -= v.rowwise().mean().eval();
  v.rowwise() -= v.colwise().mean().eval();
  o.colwise() -= o.rowwise().mean().eval();
  o.rowwise() -= o.colwise().mean().eval();

  PairStat s;
  double vv = v.cwiseProduct(v).sum();
  if (vv <= 1e-12 * static_cast<double>(nu * nt)) return s;  // no treatment variation
  s.estimate = o.cwiseProduct(v).sum() / vv;
  s.raw_weight = static_cast<double>(nu * nt) * vv;
  s.defined = true;
  return s;
}

}  // namespace

BaconResult bacon_decompose(const PanelDataset& ds, const TreatmentSchedule& schedule,
                            const std::string& outcome, int lag,
                            const std::vector<std::string>& controls) {
  TreatmentBuild build =
      build_treatment(schedule, ds.entities, ds.first_year, ds.last_year, lag);

  // Balance: keep entities whose outcome (and controls) are fully observed.
  BaconResult result;
  std::vector<std::string> kept;
  {
    const Matd& ycol = ds.column(outcome);
    std::vector<const Matd*> ccols;
    for (const auto& c : controls) ccols.push_back(&ds.column(c));
    for (Index i = 0; i < ds.n_entities(); ++i) {
      bool complete = !ycol.row(i).hasNaN();
      for (const Matd* c : ccols) complete = complete && !c->row(i).hasNaN();
      if (complete)
        kept.push_back(ds.entities[static_cast<std::size_t>(i)]);
      else
        result.dropped_unbalanced.push_back(ds.entities[static_cast<std::size_t>(i)]);
    }
  }
  require(kept.size() >= 2, ErrorCode::UnbalancedPanel,
          "fewer than 2 entities have a fully observed outcome");

  PanelDataset sub = keep_entities(ds, kept);
  TreatmentBuild sub_build =
      build_treatment(schedule, sub.entities, sub.first_year, sub.last_year, lag);
  const Matd& D = sub_build.panel.D;
  const Index ne = sub.n_entities();
  const Index ny = sub.n_years();
  result.n_entities = static_cast<long>(ne);

  // Classify entities from the treatment path.
  std::vector<Index> never, always;
  std::map<int, std::vector<Index>> cohorts;  // onset year -> units
  for (Index i = 0; i < ne; ++i) {
    double total = D.row(i).sum();
    if (total == 0.0) {
      never.push_back(i);
    } else if (total == static_cast<double>(ny)) {
      always.push_back(i);
    } else {
      Index j = 0;
      while (D(i, j) == 0.0) ++j;
      cohorts[sub.year_at(j)].push_back(i);
    }
  }
  require(!cohorts.empty(), ErrorCode::SingleCohortNoControlGroup,
          "no cohort switches treatment inside the sample window");
  require(cohorts.size() >= 2 || !never.empty() || !always.empty(),
          ErrorCode::SingleCohortNoControlGroup,
          "a single cohort needs a never- or always-treated comparison group");

  // No-covariate TWFE reference on the same balanced sample.
  result.twfe_reference =
      att_estimate(sub, sub_build.panel, outcome, {}).coef_of(kTreatmentName);

  // Treatment and outcome paths used by the pair statistics. With covariates
  // both are residualized on the demeaned controls first; the within-cell
  // share of that residual variation becomes the "Within group" category.
  Matd V = D;
  Matd O = sub.column(outcome);
  double omega_within = 0.0;
  double beta_within = missing();
  if (!controls.empty()) {
    const Index cells = ne * ny;
    Matd data(cells, 2 + static_cast<Index>(controls.size()));
    std::vector<int> cell_entity(static_cast<std::size_t>(cells));
    std::vector<int> cell_year(static_cast<std::size_t>(cells));
    for (Index i = 0; i < ne; ++i)
      for (Index j = 0; j < ny; ++j) {
        Index r = i * ny + j;
        cell_entity[static_cast<std::size_t>(r)] = static_cast<int>(i);
        cell_year[static_cast<std::size_t>(r)] = static_cast<int>(j);
        data(r, 0) = O(i, j);
        data(r, 1) = V(i, j);
        for (std::size_t c = 0; c < controls.size(); ++c)
          data(r, 2 + static_cast<Index>(c)) = sub.column(controls[c])(i, j);
      }
    demean_two_way<double>(data, cell_entity, cell_year, static_cast<int>(ne),
                           static_cast<int>(ny));
    Matd Xc = data.rightCols(static_cast<Index>(controls.size()));
    auto ky = ols_kernel<double>(Xc, Vecd(data.col(0)));
    auto kd = ols_kernel<double>(Xc, Vecd(data.col(1)));
    Vecd y_r = ky.residuals;
    Vecd d_r = kd.residuals;

    // Cohort-by-period cell means of the residualized treatment.
    std::vector<int> group_of(static_cast<std::size_t>(ne), -1);
    int n_groups = 0;
    {
      std::map<int, int> gid;
      for (const auto& [onset, units] : cohorts) {
        gid[onset] = n_groups++;
        for (Index u : units) group_of[static_cast<std::size_t>(u)] = gid[onset];
      }
      int never_id = n_groups++;
      for (Index u : never) group_of[static_cast<std::size_t>(u)] = never_id;
      int always_id = n_groups++;
      for (Index u : always) group_of[static_cast<std::size_t>(u)] = always_id;
    }
    Matd cell_sum = Matd::Zero(n_groups, ny);
    Matd cell_cnt = Matd::Zero(n_groups, ny);
    for (Index i = 0; i < ne; ++i)
      for (Index j = 0; j < ny; ++j) {
        cell_sum(group_of[static_cast<std::size_t>(i)], j) += d_r[i * ny + j];
        cell_cnt(group_of[static_cast<std::size_t>(i)], j) += 1.0;
      }
    double ss_total = d_r.squaredNorm();
    double ss_within = 0.0, num_within = 0.0;
    for (Index i = 0; i < ne; ++i)
      for (Index j = 0; j < ny; ++j) {
        Index r = i * ny + j;
        double mean = cell_sum(group_of[static_cast<std::size_t>(i)], j) /
                      cell_cnt(group_of[static_cast<std::size_t>(i)], j);
        double dw = d_r[r] - mean;
        ss_within += dw * dw;
        num_within += dw * y_r[r];
        V(i, j) = d_r[r];
        O(i, j) = y_r[r];
      }
    omega_within = ss_total > 0.0 ? ss_within / ss_total : 0.0;
    beta_within = ss_within > 0.0 ? num_within / ss_within : missing();
  }

  // Enumerate comparisons: deterministic order, earlier cohorts first.
  struct RawComparison {
    TwoByTwoComparison row;
    double raw_weight;
  };
  std::vector<RawComparison> raw;
  auto add = [&](int treated_cohort, const std::string& label, BaconCategory cat,
                 const std::vector<Index>& tr, const std::vector<Index>& ct, Index j0,
                 Index j1) {
    PairStat s = pair_stat(V, O, tr, ct, j0, j1);
    if (!s.defined) return;
    raw.push_back({{treated_cohort, label, cat, s.estimate, 0.0}, s.raw_weight});
  };

  for (const auto& [onset, units] : cohorts) {
    if (!never.empty())
      add(onset, "never_treated", BaconCategory::NeverVsTiming, units, never, 0, ny - 1);
    if (!always.empty())
      add(onset, "always_treated", BaconCategory::TimingVsAlways, units, always, 0, ny - 1);
  }
  for (auto early = cohorts.begin(); early != cohorts.end(); ++early) {
    for (auto late = std::next(early); late != cohorts.end(); ++late) {
      Index j_late = static_cast<Index>(late->first - sub.first_year);
      Index j_early = static_cast<Index>(early->first - sub.first_year);
      add(early->first, "later_cohort(" + std::to_string(late->first) + ")",
          BaconCategory::TimingGroups, early->second, late->second, 0, j_late - 1);
      add(late->first, "earlier_cohort(" + std::to_string(early->first) + ")",
          BaconCategory::TimingGroups, late->second, early->second, j_early, ny - 1);
    }
  }
  // Always vs never carries no treatment variation: the category exists with
  // zero weight and no comparison rows.

  double total_raw = 0.0;
  for (const auto& rc : raw) total_raw += rc.raw_weight;
  require(total_raw > 0.0, ErrorCode::SingleCohortNoControlGroup,
          "no comparison with treatment variation");

  double pair_share = controls.empty() ? 1.0 : 1.0 - omega_within;
  for (auto& rc : raw) {
    rc.row.weight = pair_share * rc.raw_weight / total_raw;
    result.comparisons.push_back(rc.row);
  }

  std::array<double, kBaconCategoryCount> wsum{};
  std::array<double, kBaconCategoryCount> wesum{};
  for (const auto& c : result.comparisons) {
    wsum[static_cast<int>(c.category)] += c.weight;
    wesum[static_cast<int>(c.category)] += c.weight * c.estimate;
  }
  if (!controls.empty()) {
    wsum[static_cast<int>(BaconCategory::WithinGroup)] = omega_within;
    wesum[static_cast<int>(BaconCategory::WithinGroup)] =
        is_missing(beta_within) ? 0.0 : omega_within * beta_within;
  }
  for (int c = 0; c < kBaconCategoryCount; ++c) {
    result.categories[static_cast<std::size_t>(c)].weight = wsum[static_cast<std::size_t>(c)];
    result.categories[static_cast<std::size_t>(c)].estimate =
        wsum[static_cast<std::size_t>(c)] > 0.0
            ? wesum[static_cast<std::size_t>(c)] / wsum[static_cast<std::size_t>(c)]
            : missing();
  }
  return result;
}

BadControlReport flag_bad_controls(const BaconResult& result, double threshold) {
  BadControlReport report;
  report.threshold = threshold;
  double wsum = 0.0, wesum = 0.0;
  for (const auto& c : result.comparisons) {
    if (c.category == BaconCategory::TimingVsAlways ||
        c.category == BaconCategory::NeverVsAlways) {
      wsum += c.weight;
      wesum += c.weight * c.estimate;
    }
  }
  report.always_weight = wsum;
  report.always_estimate = wsum > 0.0 ? wesum / wsum : missing();
  if (wsum > threshold) {
    report.flagged = true;
    report.reason = "always-treated comparisons carry weight " + format_number(wsum, 6) +
                    " > threshold " + format_number(threshold, 6);
  } else if (wsum > 0.0 && !is_missing(report.always_estimate) &&
             report.always_estimate * result.twfe_reference < 0.0) {
    report.flagged = true;
    report.reason = "always-treated estimate " + format_number(report.always_estimate, 6) +
                    " opposes the overall estimate " +
                    format_number(result.twfe_reference, 6);
  }
  return report;
}

}  // namespace paneval
