#pragma once

#include <array>
#include <string>
#include <vector>

#include "paneval/did.hpp"
#include "paneval/panel.hpp"

namespace paneval {

// ---------------------------------------------------------------------------
// Decomposition of the TWFE staggered-DiD estimate into 2x2 comparisons with
// variance weights, aggregated into five categories. Without covariates the
// weighted average of the 2x2 estimates reproduces the TWFE coefficient
// exactly; with covariates the residual within-cell share is reported
// separately and the identity is approximate.
// ---------------------------------------------------------------------------

enum class BaconCategory {
  TimingGroups = 0,
  TimingVsAlways = 1,
  NeverVsTiming = 2,
  NeverVsAlways = 3,
  WithinGroup = 4,
};

const char* bacon_category_name(BaconCategory c);
inline constexpr int kBaconCategoryCount = 5;

struct TwoByTwoComparison {
  int treated_cohort = 0;   // onset year of the treatment group
  std::string comparison;   // never_treated | always_treated | earlier/later_cohort(year)
  BaconCategory category = BaconCategory::TimingGroups;
  double estimate = 0.0;
  double weight = 0.0;
};

struct BaconAggregate {
  double estimate = std::numeric_limits<double>::quiet_NaN();  // weighted average
  double weight = 0.0;
};

struct BaconResult {
  std::vector<TwoByTwoComparison> comparisons;
  std::array<BaconAggregate, kBaconCategoryCount> categories;
  double twfe_reference = 0.0;  // no-covariate TWFE estimate on the same sample
  std::vector<std::string> dropped_unbalanced;  // entities removed to balance
  long n_entities = 0;
};

/// Balances the panel by keeping entities with fully observed outcome (and
/// controls), classifies them into never / always / timing cohorts from the
/// treatment path, and enumerates every 2x2 comparison with its variance
/// weight.
BaconResult bacon_decompose(const PanelDataset& ds, const TreatmentSchedule& schedule,
                            const std::string& outcome, int lag = 1,
                            const std::vector<std::string>& controls = {});

struct BadControlReport {
  double always_weight = 0.0;    // total weight on always-treated comparisons
  double always_estimate = std::numeric_limits<double>::quiet_NaN();
  double threshold = 0.05;
  bool flagged = false;
  std::string reason;
};

/// Recommends deleting always-treated entities when their comparisons carry
/// more than `threshold` of the weight or their aggregate estimate opposes
/// the overall estimate's sign.
BadControlReport flag_bad_controls(const BaconResult& result, double threshold = 0.05);

}  // namespace paneval
