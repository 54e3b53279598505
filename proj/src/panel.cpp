#include "paneval/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace paneval {

std::optional<Index> PanelDataset::entity_index(const std::string& name) const {
  for (Index i = 0; i < n_entities(); ++i)
    if (entities[static_cast<std::size_t>(i)] == name) return i;
  return std::nullopt;
}

std::optional<Index> PanelDataset::year_index(int year) const {
  if (year < first_year || year > last_year) return std::nullopt;
  return static_cast<Index>(year - first_year);
}

const Matd& PanelDataset::column(const std::string& name) const {
  auto it = columns.find(name);
  if (it == columns.end()) raise(ErrorCode::UnknownVariable, "no column '" + name + "'");
  return it->second;
}

void PanelDataset::add_column(const std::string& name, Matd values) {
  require(!has_column(name), ErrorCode::TargetCollision,
          "column '" + name + "' already exists");
  require(values.rows() == n_entities() && values.cols() == n_years(),
          ErrorCode::InvalidSpec, "column '" + name + "' has wrong shape");
  column_names.push_back(name);
  columns.emplace(name, std::move(values));
}

void PanelDataset::set_meta(const std::string& attr, std::vector<std::string> values) {
  require(values.size() == entities.size(), ErrorCode::InvalidSpec,
          "meta '" + attr + "' must have one value per entity");
  meta[attr] = std::move(values);
}

std::unordered_map<std::string, std::string> PanelDataset::meta_of(Index entity) const {
  std::unordered_map<std::string, std::string> out;
  for (const auto& [attr, values] : meta)
    out.emplace(attr, values[static_cast<std::size_t>(entity)]);
  return out;
}

PanelDataset load_panel_table(const CsvTable& table, const std::string& origin) {
  require(table.header.size() >= 2 && table.header[0] == "entity" && table.header[1] == "year",
          ErrorCode::RaggedHeader, origin + ": header must start with 'entity,year'");
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : table.header)
      require(seen.insert(h).second, ErrorCode::RaggedHeader,
              origin + ": duplicate header field '" + h + "'");
  }

  PanelDataset ds;
  std::unordered_map<std::string, Index> entity_of;
  std::vector<std::pair<Index, int>> row_cell;  // (entity index, year) per data row
  row_cell.reserve(table.rows.size());

  int y_min = 0, y_max = 0;
  bool any = false;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    require(!row[0].empty(), ErrorCode::NonNumericValue,
            "row " + std::to_string(r + 1) + ": empty entity");
    int year = static_cast<int>(parse_integer(row[1], r + 1, "year"));
    auto [it, inserted] = entity_of.emplace(row[0], static_cast<Index>(ds.entities.size()));
    if (inserted) ds.entities.push_back(row[0]);
    row_cell.emplace_back(it->second, year);
    if (!any || year < y_min) y_min = year;
    if (!any || year > y_max) y_max = year;
    any = true;
  }
  require(any, ErrorCode::EmptySample, origin + ": no data rows");
  ds.first_year = y_min;
  ds.last_year = y_max;

  const Index ne = ds.n_entities();
  const Index ny = ds.n_years();

  // Duplicate (entity, year) detection.
  {
    std::vector<char> seen(static_cast<std::size_t>(ne * ny), 0);
    for (std::size_t r = 0; r < row_cell.size(); ++r) {
      auto [e, year] = row_cell[r];
      auto idx = static_cast<std::size_t>(e * ny + (year - y_min));
      if (seen[idx]) {
        raise(ErrorCode::DuplicateCell,
              origin + ": duplicate cell (" + ds.entities[static_cast<std::size_t>(e)] +
                  ", " + std::to_string(year) + ") at row " + std::to_string(r + 1));
      }
      seen[idx] = 1;
    }
  }

  for (std::size_t c = 2; c < table.header.size(); ++c) {
    Matd col = Matd::Constant(ne, ny, missing());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const std::string& cell = table.rows[r][c];
      if (cell.empty()) continue;
      auto [e, year] = row_cell[r];
      col(e, year - y_min) = parse_number(cell, r + 1, table.header[c]);
    }
    ds.column_names.push_back(table.header[c]);
    ds.columns.emplace(table.header[c], std::move(col));
  }
  return ds;
}

PanelDataset load_panel(const std::string& path) {
  return load_panel_table(read_csv(path), path);
}

PanelDataset keep_entities(const PanelDataset& ds, const std::vector<std::string>& keep) {
  std::unordered_set<std::string> wanted(keep.begin(), keep.end());
  std::vector<Index> rows;
  for (Index i = 0; i < ds.n_entities(); ++i)
    if (wanted.count(ds.entities[static_cast<std::size_t>(i)])) rows.push_back(i);
  require(!rows.empty(), ErrorCode::EmptySubset, "no entities left");

  PanelDataset out;
  out.first_year = ds.first_year;
  out.last_year = ds.last_year;
  for (Index i : rows) out.entities.push_back(ds.entities[static_cast<std::size_t>(i)]);
  out.column_names = ds.column_names;
  for (const auto& name : ds.column_names) {
    const Matd& src = ds.columns.at(name);
    Matd dst(static_cast<Index>(rows.size()), ds.n_years());
    for (std::size_t k = 0; k < rows.size(); ++k) dst.row(static_cast<Index>(k)) = src.row(rows[k]);
    out.columns.emplace(name, std::move(dst));
  }
  for (const auto& [attr, values] : ds.meta) {
    std::vector<std::string> kept;
    kept.reserve(rows.size());
    for (Index i : rows) kept.push_back(values[static_cast<std::size_t>(i)]);
    out.meta.emplace(attr, std::move(kept));
  }
  return out;
}

namespace {

void interpolate_row(Eigen::Ref<Eigen::RowVectorXd> row) {
  const Index ny = row.cols();
  Index prev = -1;  // last observed index
  for (Index j = 0; j < ny; ++j) {
    if (is_missing(row(j))) continue;
    if (prev >= 0 && j - prev > 1) {
      double lo = row(prev), hi = row(j);
      for (Index k = prev + 1; k < j; ++k) {
        double w = static_cast<double>(k - prev) / static_cast<double>(j - prev);
        row(k) = lo + w * (hi - lo);
      }
    }
    prev = j;
  }
  // Leading/trailing runs are left missing: no extrapolation.
}

Matd interpolated(const Matd& col) {
  Matd out = col;
  for (Index i = 0; i < out.rows(); ++i) {
    Eigen::RowVectorXd row = out.row(i);
    interpolate_row(row);
    out.row(i) = row;
  }
  return out;
}

Matd clamped(const Matd& col) {
  Matd out = col;
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j)
      if (!is_missing(out(i, j)) && out(i, j) < 0.0) out(i, j) = 0.0;
  return out;
}

}  // namespace

PanelDataset interpolate_missing(const PanelDataset& ds, const std::string& var) {
  PanelDataset out = ds;
  out.columns[var] = interpolated(ds.column(var));
  return out;
}

PanelDataset clamp_negative_to_zero(const PanelDataset& ds, const std::string& var) {
  PanelDataset out = ds;
  out.columns[var] = clamped(ds.column(var));
  return out;
}

EmploymentTable load_employment_table(const CsvTable& table, const std::string& origin) {
  require(table.header.size() == 4 && table.header[0] == "entity" &&
              table.header[1] == "industry" && table.header[2] == "year" &&
              table.header[3] == "employment",
          ErrorCode::RaggedHeader,
          origin + ": header must be 'entity,industry,year,employment'");
  EmploymentTable emp;
  std::set<std::tuple<std::string, std::string, int>> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    EmploymentTable::Entry e;
    e.entity = row[0];
    e.industry = row[1];
    e.year = static_cast<int>(parse_integer(row[2], r + 1, "year"));
    e.employment = parse_number(row[3], r + 1, "employment");
    require(e.employment >= 0.0, ErrorCode::InvalidSpec,
            origin + ": negative employment at row " + std::to_string(r + 1));
    require(seen.emplace(e.entity, e.industry, e.year).second, ErrorCode::DuplicateCell,
            origin + ": duplicate (entity, industry, year) at row " + std::to_string(r + 1));
    emp.entries.push_back(std::move(e));
  }
  return emp;
}

EmploymentTable load_employment(const std::string& path) {
  return load_employment_table(read_csv(path), path);
}

std::map<std::string, double> location_quotient(const EmploymentTable& emp,
                                                const std::string& industry, int year) {
  std::map<std::string, double> entity_total;
  std::map<std::string, double> entity_industry;
  double grand_total = 0.0, industry_total = 0.0;
  for (const auto& e : emp.entries) {
    if (e.year != year) continue;
    entity_total[e.entity] += e.employment;
    grand_total += e.employment;
    if (e.industry == industry) {
      entity_industry[e.entity] += e.employment;
      industry_total += e.employment;
    }
  }
  require(grand_total > 0.0, ErrorCode::ZeroDenominator,
          "total employment in year " + std::to_string(year) + " is zero");
  require(industry_total > 0.0, ErrorCode::ZeroDenominator,
          "industry '" + industry + "' has zero employment in year " + std::to_string(year));
  double national_share = industry_total / grand_total;

  std::map<std::string, double> lq;
  for (const auto& [entity, total] : entity_total) {
    require(total > 0.0, ErrorCode::ZeroDenominator,
            "entity '" + entity + "' has zero total employment in year " + std::to_string(year));
    auto it = entity_industry.find(entity);
    double share = (it == entity_industry.end() ? 0.0 : it->second) / total;
    lq[entity] = share / national_share;
  }
  return lq;
}

Matd location_quotient_column(const EmploymentTable& emp, const std::string& industry,
                              const std::vector<std::string>& entities,
                              int first_year, int last_year) {
  const Index ne = static_cast<Index>(entities.size());
  const Index ny = static_cast<Index>(last_year - first_year + 1);
  Matd out = Matd::Constant(ne, ny, missing());
  std::set<int> years;
  for (const auto& e : emp.entries) years.insert(e.year);
  for (int year : years) {
    if (year < first_year || year > last_year) continue;
    auto lq = location_quotient(emp, industry, year);
    for (Index i = 0; i < ne; ++i) {
      auto it = lq.find(entities[static_cast<std::size_t>(i)]);
      if (it != lq.end()) out(i, year - first_year) = it->second;
    }
  }
  return out;
}

TransformResult apply_transform(const PanelDataset& ds, const VariableTransformSpec& spec) {
  const Matd& src = ds.column(spec.source);
  require(!spec.target.empty(), ErrorCode::InvalidSpec, "empty target name");

  TransformResult result{ds, 0};
  Matd out;
  switch (spec.kind) {
    case TransformKind::Log: {
      out = Matd::Constant(src.rows(), src.cols(), missing());
      for (Index i = 0; i < src.rows(); ++i)
        for (Index j = 0; j < src.cols(); ++j) {
          double v = src(i, j);
          if (is_missing(v)) continue;
          if (v > 0.0) {
            out(i, j) = std::log(v);
          } else {
            ++result.nonpositive_dropped;
          }
        }
      break;
    }
    case TransformKind::LinearInterpolate:
      out = interpolated(src);
      break;
    case TransformKind::ClampNegativeToZero:
      out = clamped(src);
      break;
    case TransformKind::Lag: {
      require(spec.lag_k >= 1, ErrorCode::InvalidSpec, "lag k must be >= 1");
      require(spec.lag_k < ds.n_years(), ErrorCode::InvalidSpec,
              "lag k must be smaller than the number of years");
      out = Matd::Constant(src.rows(), src.cols(), missing());
      for (Index j = spec.lag_k; j < src.cols(); ++j) out.col(j) = src.col(j - spec.lag_k);
      break;
    }
  }
  result.ds.add_column(spec.target, std::move(out));
  return result;
}

std::vector<VariableStats> describe(const PanelDataset& ds) {
  std::vector<VariableStats> out;
  out.reserve(ds.column_names.size());
  for (const auto& name : ds.column_names) {
    const Matd& col = ds.columns.at(name);
    VariableStats s;
    s.name = name;
    double sum = 0.0;
    s.min = missing();
    s.max = missing();
    for (Index i = 0; i < col.rows(); ++i)
      for (Index j = 0; j < col.cols(); ++j) {
        double v = col(i, j);
        if (is_missing(v)) continue;
        ++s.n;
        sum += v;
        if (is_missing(s.min) || v < s.min) s.min = v;
        if (is_missing(s.max) || v > s.max) s.max = v;
      }
    if (s.n > 0) {
      s.mean = sum / static_cast<double>(s.n);
      if (s.n > 1) {
        double ss = 0.0;
        for (Index i = 0; i < col.rows(); ++i)
          for (Index j = 0; j < col.cols(); ++j) {
            double v = col(i, j);
            if (is_missing(v)) continue;
            ss += (v - s.mean) * (v - s.mean);
          }
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
      } else {
        s.sd = missing();
      }
    } else {
      s.mean = missing();
      s.sd = missing();
    }
    out.push_back(std::move(s));
  }
  return out;
}

PanelDataset subset(const PanelDataset& ds,
                    const std::function<bool(const std::unordered_map<std::string, std::string>&)>& pred) {
  std::vector<std::string> keep;
  for (Index i = 0; i < ds.n_entities(); ++i)
    if (pred(ds.meta_of(i))) keep.push_back(ds.entities[static_cast<std::size_t>(i)]);
  require(!keep.empty(), ErrorCode::EmptySubset, "predicate matched no entities");
  return keep_entities(ds, keep);
}

PanelDataset subset_by_meta(const PanelDataset& ds, const std::string& attr,
                            const std::string& value) {
  require(ds.meta.count(attr) > 0, ErrorCode::UnknownVariable, "no meta attribute '" + attr + "'");
  return subset(ds, [&](const std::unordered_map<std::string, std::string>& m) {
    auto it = m.find(attr);
    return it != m.end() && it->second == value;
  });
}

}  // namespace paneval
