#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace paneval {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // each row has header.size() fields
};

/// Reads a comma-separated file with a mandatory header row. Rows whose field
/// count differs from the header raise RaggedHeader. Trailing '\r' is
/// stripped; fields are not quoted or escaped.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& content, const std::string& origin);

/// Strict numeric parse: full-string, scientific notation allowed, anything
/// else (including thousands separators) raises NonNumericValue with the
/// 1-based data row index.
double parse_number(const std::string& cell, std::size_t row_index,
                    const std::string& column);

/// Strict integer parse with the same error contract.
long parse_integer(const std::string& cell, std::size_t row_index,
                   const std::string& column);

void write_file(const std::string& path, const std::string& content);

/// %.{sig}g formatting; missing (NaN) renders as the empty string.
std::string format_number(double v, int significant = 10);

}  // namespace paneval
