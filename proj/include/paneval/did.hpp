#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paneval/panel.hpp"
#include "paneval/regress.hpp"

namespace paneval {

// ---------------------------------------------------------------------------
// Treatment construction
// ---------------------------------------------------------------------------

struct TreatmentSchedule {
  std::map<std::string, int> first_event_year;                // absent = never treated
  std::map<std::string, std::vector<int>> all_event_years;    // kept for audit

  std::optional<int> event_year(const std::string& entity) const {
    auto it = first_event_year.find(entity);
    if (it == first_event_year.end()) return std::nullopt;
    return it->second;
  }

  /// Repeat rows for one entity collapse into the earliest event.
  static TreatmentSchedule from_rows(const std::vector<std::pair<std::string, int>>& rows);
};

TreatmentSchedule load_schedule(const std::string& path);

struct TreatmentPanel {
  std::vector<std::string> entities;  // alignment record
  Matd D;                             // entities x years, 0/1, absorbing
  int first_year = 0;
  int lag = 1;
  bool collapsed = false;  // repeat events were absorbed into the first
};

struct TreatmentBuild {
  TreatmentPanel panel;
  std::vector<std::string> excluded;  // entities treated before drop_treated_before
};

/// D(i,t) = 1 iff t >= first_event_year(i) + lag. Entities whose first event
/// precedes drop_treated_before are removed from the panel entirely and
/// listed in `excluded`.
TreatmentBuild build_treatment(const TreatmentSchedule& schedule,
                               const std::vector<std::string>& entities,
                               int first_year, int last_year, int lag = 1,
                               std::optional<int> drop_treated_before = std::nullopt);

/// Applies build_treatment and restricts the dataset to surviving entities.
struct DidSetup {
  PanelDataset ds;
  TreatmentPanel treatment;
  std::vector<std::string> excluded;
};
DidSetup prepare_did(const PanelDataset& ds, const TreatmentSchedule& schedule, int lag = 1,
                     std::optional<int> drop_treated_before = std::nullopt);

/// Name of the treatment coefficient everywhere downstream.
inline const char* kTreatmentName = "hightech";

/// Copy of ds with the treatment dummy attached as column `hightech`.
PanelDataset with_treatment_column(const PanelDataset& ds, const TreatmentPanel& treatment);

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

/// TWFE fit of the outcome on [hightech, controls...]; the ATT is the
/// `hightech` coefficient.
FitResult att_estimate(const PanelDataset& ds, const TreatmentPanel& treatment,
                       const std::string& outcome, const std::vector<std::string>& controls,
                       const std::string& cluster = "");

// ---------------------------------------------------------------------------
// Event study
// ---------------------------------------------------------------------------

struct EventStudyResult {
  std::map<int, std::pair<double, double>> coef_se;  // rel time -> (coef, se)
  std::vector<int> missing;                          // ks with no contributing entity
  int reference_period = -1;                         // coefficient pinned to 0
  std::pair<int, int> window{0, 0};
  bool binned_endpoints = true;
  FitResult fit;
};

/// Relative-time indicators 1[t - (event + lag) = k] for k in [window.first,
/// window.second], endpoints accumulating (<= and >=), k = -1 omitted as the
/// reference. Never-treated entities carry all-zero indicators and anchor the
/// comparison.
EventStudyResult event_study(const PanelDataset& ds, const TreatmentSchedule& schedule,
                             const std::string& outcome, const std::vector<std::string>& controls,
                             std::pair<int, int> window, const std::string& cluster = "",
                             int lag = 1);

// ---------------------------------------------------------------------------
// Permutation placebo
// ---------------------------------------------------------------------------

enum class PlaceboMode { PermuteEntities, PermuteYears, PermuteBoth };

const char* placebo_mode_name(PlaceboMode m);
PlaceboMode placebo_mode_from(const std::string& name);

struct PlaceboResult {
  std::vector<double> draws;  // pseudo estimates, one per rep
  double observed = 0.0;
  double p_value = 0.0;  // fraction of |draws| >= |observed|
  std::uint64_t seed = 0;
  PlaceboMode mode = PlaceboMode::PermuteBoth;
};

/// Every rep draws a pseudo-schedule that preserves the number of treated
/// entities and the multiset of event years, refits the ATT and records the
/// pseudo estimate. Rep r depends only on (seed, r), so results are identical
/// for any thread count.
PlaceboResult placebo(const PanelDataset& ds, const TreatmentSchedule& schedule,
                      const std::string& outcome, const std::vector<std::string>& controls,
                      int n_reps = 500, std::uint64_t seed = 1,
                      PlaceboMode mode = PlaceboMode::PermuteBoth, int lag = 1,
                      int threads = 1);

// ---------------------------------------------------------------------------
// Selection diagnostics and moderation
// ---------------------------------------------------------------------------

/// Pooled logit of an existing 0/1 status column on candidate predictors.
FitResult selection_test(const PanelDataset& ds, const std::string& status_column,
                         const std::vector<std::string>& predictors);

struct ModerationSpec {
  std::string moderator;
  bool center = false;  // demean the moderator before interacting
};

/// TWFE fit with hightech, the moderator, and their interaction
/// `hightech_<moderator>`.
FitResult moderation_fit(const PanelDataset& ds, const TreatmentPanel& treatment,
                         const std::string& outcome, const ModerationSpec& spec,
                         const std::vector<std::string>& controls,
                         const std::string& cluster = "");

}  // namespace paneval
