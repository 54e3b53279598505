#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "paneval/did.hpp"
#include "paneval/panel.hpp"
#include "paneval/regress.hpp"

namespace paneval {

// ---------------------------------------------------------------------------
// Data-generating processes with known truth. All draws are keyed on
// (seed, entity, year, stream), so output is bitwise reproducible and
// independent of evaluation order.
// ---------------------------------------------------------------------------

struct DgpSpec {
  int n_entities = 100;
  int n_years = 10;
  int first_year = 2000;
  double delta = 0.0;                     // homogeneous treatment effect
  std::map<int, double> cohort_fractions;  // event year -> fraction; rest never treated
  std::map<int, double> effect_heterogeneity;  // optional per-cohort effect
  double pre_trend = 0.0;  // slope on (t - t*) for treated entities before t*
  double entity_fe_sd = 1.0;
  double year_fe_sd = 1.0;
  double noise_sd = 1.0;
  double serial_corr = 0.0;  // AR(1) in the noise within entity
  double rho = 0.0;          // spatial autocorrelation (simulate_sdm)
  std::optional<std::pair<std::string, double>> interaction;  // moderator name, slope on D*M
  int lag = 1;  // years between event and effect onset
  std::uint64_t seed = 1;
};

struct SimulatedPanel {
  PanelDataset ds;          // outcome "y" (+ moderator / control columns)
  std::map<std::string, int> events;  // entity -> event year (absent = never)
  std::vector<std::string> warnings;

  TreatmentSchedule schedule() const {
    std::vector<std::pair<std::string, int>> rows(events.begin(), events.end());
    return TreatmentSchedule::from_rows(rows);
  }
};

/// y_it = a_i + l_t + tau_c D_it + pre_trend*(t - t*_i)*1[treated, t < t*_i]
///        + slope*M_it*D_it + e_it, with D_it = 1[t >= event + lag].
SimulatedPanel simulate_did(const DgpSpec& spec);

struct SpatialWeights;  // spatial.hpp

/// Per year: y_t = (I - rho W)^-1 (delta D_t + X_t b + W X_t g + a + l_t + e_t)
/// via a dense solve, with one control column "x1" (b = 1, g = 0.5). With
/// with_controls = false the X block is omitted, and at rho = 0 the output
/// matches simulate_did bitwise for the same seed and parameters.
SimulatedPanel simulate_sdm(const DgpSpec& spec, const SpatialWeights& W,
                            bool with_controls = true);

/// Explicit dummy-variable OLS (intercept, entity dummies, year dummies,
/// regressors) on small panels; the independent cross-check for twfe_fit.
/// Slope coefficients carry the regressor names.
FitResult oracle_dummy_ols(const PanelDataset& ds, const DesignSpec& spec);

/// "e0001", "e0002", ... as used by the simulators.
std::vector<std::string> synthetic_entity_names(int n);

}  // namespace paneval
