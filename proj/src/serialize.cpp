#include "paneval/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace paneval {

namespace {

json num_or_null(double v) {
  if (std::isnan(v) || std::isinf(v)) return nullptr;
  return v;
}

}  // namespace

json fit_to_json(const FitResult& fit) {
  json coef = json::object();
  json se = json::object();
  for (std::size_t i = 0; i < fit.coef_names.size(); ++i) {
    coef[fit.coef_names[i]] = num_or_null(fit.coef[static_cast<Index>(i)]);
    se[fit.coef_names[i]] = num_or_null(fit.se[static_cast<Index>(i)]);
  }
  json r2 = {{"within", num_or_null(fit.r2_within)},
             {"between", num_or_null(fit.r2_between)},
             {"overall", num_or_null(fit.r2_overall)},
             {"adjusted", num_or_null(fit.r2_adjusted)}};
  if (!std::isnan(fit.r2_pseudo)) r2["pseudo"] = fit.r2_pseudo;
  return json{{"coef", coef},
              {"se", se},
              {"nobs", fit.nobs},
              {"r2", r2},
              {"dropped_columns", fit.dropped_columns}};
}

json sdm_to_json(const SdmFit& fit) {
  json coef = json::object();
  json se = json::object();
  for (std::size_t i = 0; i < fit.coef_names.size(); ++i) {
    coef[fit.coef_names[i]] = num_or_null(fit.coef[static_cast<Index>(i)]);
    se[fit.coef_names[i]] = num_or_null(fit.se[static_cast<Index>(i)]);
  }
  return json{{"rho", num_or_null(fit.rho)},
              {"rho_se", num_or_null(fit.rho_se)},
              {"coef", coef},
              {"se", se},
              {"nobs", fit.nobs},
              {"log_likelihood", num_or_null(fit.log_likelihood)},
              {"rho_interval", {num_or_null(fit.rho_interval.first),
                                num_or_null(fit.rho_interval.second)}},
              {"dropped_columns", fit.dropped_columns},
              {"warnings", fit.warnings}};
}

json bacon_to_json(const BaconResult& result, const BadControlReport& report) {
  json cats = json::object();
  for (int c = 0; c < kBaconCategoryCount; ++c) {
    const auto& agg = result.categories[static_cast<std::size_t>(c)];
    cats[bacon_category_name(static_cast<BaconCategory>(c))] = {
        {"estimate", num_or_null(agg.estimate)}, {"weight", agg.weight}};
  }
  json comps = json::array();
  for (const auto& c : result.comparisons)
    comps.push_back({{"treated_cohort", c.treated_cohort},
                     {"comparison", c.comparison},
                     {"category", bacon_category_name(c.category)},
                     {"estimate", num_or_null(c.estimate)},
                     {"weight", c.weight}});
  return json{{"twfe_reference", num_or_null(result.twfe_reference)},
              {"categories", cats},
              {"comparisons", comps},
              {"n_entities", result.n_entities},
              {"dropped_unbalanced", result.dropped_unbalanced},
              {"bad_controls", {{"always_weight", report.always_weight},
                                {"always_estimate", num_or_null(report.always_estimate)},
                                {"threshold", report.threshold},
                                {"flagged", report.flagged},
                                {"reason", report.reason}}}};
}

json event_study_to_json(const EventStudyResult& result) {
  json coef = json::object();
  for (const auto& [k, cs] : result.coef_se)
    coef[std::to_string(k)] = {num_or_null(cs.first), num_or_null(cs.second)};
  return json{{"window", {result.window.first, result.window.second}},
              {"reference_period", result.reference_period},
              {"binned_endpoints", result.binned_endpoints},
              {"coef_se", coef},
              {"missing", result.missing},
              {"nobs", result.fit.nobs}};
}

json placebo_to_json(const PlaceboResult& result) {
  return json{{"observed", num_or_null(result.observed)},
              {"p_value", result.p_value},
              {"n_reps", result.draws.size()},
              {"seed", result.seed},
              {"mode", placebo_mode_name(result.mode)}};
}

std::string describe_to_csv(const std::vector<VariableStats>& stats) {
  std::ostringstream out;
  out << "variable,n,mean,sd,min,max\n";
  for (const auto& s : stats) {
    out << s.name << ',' << s.n << ',' << format_number(s.mean, 6) << ','
        << format_number(s.sd, 6) << ',' << format_number(s.min, 6) << ','
        << format_number(s.max, 6) << '\n';
  }
  return out.str();
}

std::string event_study_to_csv(const EventStudyResult& result) {
  std::ostringstream out;
  out << "rel_time,coef,se\n";
  for (int k = result.window.first; k <= result.window.second; ++k) {
    auto it = result.coef_se.find(k);
    if (it == result.coef_se.end()) {
      out << k << ",,\n";  // EmptyCohort: no entity contributes this k
    } else {
      out << k << ',' << format_number(it->second.first) << ','
          << format_number(it->second.second) << '\n';
    }
  }
  return out.str();
}

std::string placebo_to_csv(const PlaceboResult& result) {
  std::ostringstream out;
  out << "rep,delta\n";
  for (std::size_t i = 0; i < result.draws.size(); ++i)
    out << i << ',' << format_number(result.draws[i]) << '\n';
  return out.str();
}

std::string bacon_comparisons_to_csv(const BaconResult& result) {
  std::ostringstream out;
  out << "treated_cohort,comparison,estimate,weight\n";
  for (const auto& c : result.comparisons)
    out << c.treated_cohort << ',' << c.comparison << ',' << format_number(c.estimate) << ','
        << format_number(c.weight) << '\n';
  return out.str();
}

std::string bacon_categories_to_csv(const BaconResult& result) {
  std::ostringstream out;
  out << "category,estimate,weight\n";
  for (int c = 0; c < kBaconCategoryCount; ++c) {
    const auto& agg = result.categories[static_cast<std::size_t>(c)];
    out << bacon_category_name(static_cast<BaconCategory>(c)) << ','
        << format_number(agg.estimate) << ',' << format_number(agg.weight) << '\n';
  }
  return out.str();
}

std::string ring_to_csv(const FitResult& fit, int m) {
  std::ostringstream out;
  out << "ring_n,coef,se\n";
  for (int n = 1; n <= m; ++n) {
    int i = fit.index_of("ring_" + std::to_string(n));
    if (i < 0) {
      out << n << ",,\n";  // dropped for lack of variation
    } else {
      out << n << ',' << format_number(fit.coef[i]) << ',' << format_number(fit.se[i]) << '\n';
    }
  }
  return out.str();
}

std::string panel_to_csv(const PanelDataset& ds) {
  std::ostringstream out;
  out << "entity,year";
  for (const auto& name : ds.column_names) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < ds.n_entities(); ++i)
    for (Index j = 0; j < ds.n_years(); ++j) {
      out << ds.entities[static_cast<std::size_t>(i)] << ',' << ds.year_at(j);
      for (const auto& name : ds.column_names)
        out << ',' << format_number(ds.columns.at(name)(i, j), 17);
      out << '\n';
    }
  return out.str();
}

std::string schedule_to_csv(const TreatmentSchedule& schedule) {
  std::ostringstream out;
  out << "entity,event_year\n";
  for (const auto& [entity, years] : schedule.all_event_years)
    for (int y : years) out << entity << ',' << y << '\n';
  return out.str();
}

std::string adjacency_to_csv(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::ostringstream out;
  out << "entity_a,entity_b\n";
  for (const auto& [a, b] : pairs) out << a << ',' << b << '\n';
  return out.str();
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::InvalidSpec, "cannot open file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace paneval
