#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "paneval/csv.hpp"
#include "paneval/errors.hpp"
#include "paneval/types.hpp"

namespace paneval {

// ---------------------------------------------------------------------------
// PanelDataset: a dense entity x year table of named numeric variables.
// Every (entity, year) cell exists for every column; missingness is an
// explicit NaN, never an absent cell. Datasets are immutable in spirit: all
// operations return a transformed copy.
// ---------------------------------------------------------------------------

struct PanelDataset {
  std::vector<std::string> entities;  // unique, first-appearance order
  int first_year = 0;
  int last_year = -1;  // inclusive; last < first means empty
  std::vector<std::string> column_names;
  std::unordered_map<std::string, Matd> columns;  // each n_entities x n_years
  // Per-entity attributes (region, tier, province...), aligned with entities.
  std::unordered_map<std::string, std::vector<std::string>> meta;

  Index n_entities() const { return static_cast<Index>(entities.size()); }
  Index n_years() const {
    return last_year < first_year ? 0 : static_cast<Index>(last_year - first_year + 1);
  }
  int year_at(Index j) const { return first_year + static_cast<int>(j); }

  std::optional<Index> entity_index(const std::string& name) const;
  std::optional<Index> year_index(int year) const;

  bool has_column(const std::string& name) const { return columns.count(name) > 0; }
  const Matd& column(const std::string& name) const;  // throws UnknownVariable
  void add_column(const std::string& name, Matd values);  // throws TargetCollision
  void set_meta(const std::string& attr, std::vector<std::string> values);

  /// Meta attributes of one entity, keyed by attribute name.
  std::unordered_map<std::string, std::string> meta_of(Index entity) const;
};

/// Parses the standard panel CSV (`entity,year,<vars...>`, empty cell =
/// missing). Duplicate (entity, year) rows are an error even when identical.
PanelDataset load_panel(const std::string& path);
PanelDataset load_panel_table(const CsvTable& table, const std::string& origin);

/// Restricts the panel to the listed entities (panel order preserved).
PanelDataset keep_entities(const PanelDataset& ds, const std::vector<std::string>& keep);

/// Linear interpolation of interior missing runs within each entity's series.
/// Leading and trailing runs stay missing: no extrapolation.
PanelDataset interpolate_missing(const PanelDataset& ds, const std::string& var);

/// Replaces negative cells with zero; missing cells stay missing.
PanelDataset clamp_negative_to_zero(const PanelDataset& ds, const std::string& var);

// ---------------------------------------------------------------------------
// Employment table and location quotient
// ---------------------------------------------------------------------------

struct EmploymentTable {
  struct Entry {
    std::string entity;
    std::string industry;
    int year = 0;
    double employment = 0.0;  // >= 0
  };
  std::vector<Entry> entries;  // at most one per (entity, industry, year)
};

EmploymentTable load_employment(const std::string& path);
EmploymentTable load_employment_table(const CsvTable& table, const std::string& origin);

/// lq(i) = (e_ir / e_i.) / (e_.r / e_..): entity i's employment share in
/// industry r over the national share of industry r, for one year.
std::map<std::string, double> location_quotient(const EmploymentTable& emp,
                                                const std::string& industry,
                                                int year);

/// Location quotient per (entity, year) as a panel column; cells with no
/// employment data for that year are missing.
Matd location_quotient_column(const EmploymentTable& emp, const std::string& industry,
                              const std::vector<std::string>& entities,
                              int first_year, int last_year);

// ---------------------------------------------------------------------------
// Variable transforms
// ---------------------------------------------------------------------------

enum class TransformKind { Log, LinearInterpolate, ClampNegativeToZero, Lag };

struct VariableTransformSpec {
  std::string source;
  TransformKind kind = TransformKind::Log;
  int lag_k = 1;  // only for Lag; >= 1
  std::string target;
};

struct TransformResult {
  PanelDataset ds;
  long nonpositive_dropped = 0;  // Log only: observed cells <= 0 made missing
};

TransformResult apply_transform(const PanelDataset& ds, const VariableTransformSpec& spec);

// ---------------------------------------------------------------------------
// Descriptive statistics
// ---------------------------------------------------------------------------

struct VariableStats {
  std::string name;
  long n = 0;          // non-missing cells
  double mean = 0.0;   // NaN when undefined
  double sd = 0.0;     // sample sd, NaN when n < 2
  double min = 0.0;
  double max = 0.0;
};

std::vector<VariableStats> describe(const PanelDataset& ds);

/// Panel restricted to entities whose meta attributes satisfy the predicate.
PanelDataset subset(const PanelDataset& ds,
                    const std::function<bool(const std::unordered_map<std::string, std::string>&)>& pred);
PanelDataset subset_by_meta(const PanelDataset& ds, const std::string& attr,
                            const std::string& value);

}  // namespace paneval
