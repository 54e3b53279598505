#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "paneval/bacon.hpp"
#include "paneval/did.hpp"
#include "paneval/panel.hpp"
#include "paneval/regress.hpp"
#include "paneval/spatial.hpp"

namespace paneval {

using json = nlohmann::json;

/// {coef, se, nobs, r2{within,between,overall,adjusted[,pseudo]}, dropped_columns}
json fit_to_json(const FitResult& fit);
json sdm_to_json(const SdmFit& fit);
json bacon_to_json(const BaconResult& result, const BadControlReport& report);
json event_study_to_json(const EventStudyResult& result);
json placebo_to_json(const PlaceboResult& result);

/// `variable,n,mean,sd,min,max` at 6 significant digits, missing = empty.
std::string describe_to_csv(const std::vector<VariableStats>& stats);
std::string event_study_to_csv(const EventStudyResult& result);   // rel_time,coef,se
std::string placebo_to_csv(const PlaceboResult& result);          // rep,delta
std::string bacon_comparisons_to_csv(const BaconResult& result);  // treated_cohort,comparison,estimate,weight
std::string bacon_categories_to_csv(const BaconResult& result);   // category,estimate,weight
std::string ring_to_csv(const FitResult& fit, int m);             // ring_n,coef,se

std::string panel_to_csv(const PanelDataset& ds);
std::string schedule_to_csv(const TreatmentSchedule& schedule);
std::string adjacency_to_csv(const std::vector<std::pair<std::string, std::string>>& pairs);

/// FNV-1a 64-bit digest of a file's bytes, as "fnv1a64:<hex>".
std::string file_digest(const std::string& path);

}  // namespace paneval
