#include "paneval/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "paneval/errors.hpp"

namespace paneval {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

CsvTable parse_csv(const std::string& content, const std::string& origin) {
  CsvTable table;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && line_no > 1) continue;  // tolerate trailing blank lines
    auto fields = split_fields(line);
    if (line_no == 1) {
      require(!fields.empty() && !fields[0].empty(), ErrorCode::RaggedHeader,
              origin + ": empty header row");
      table.header = std::move(fields);
    } else {
      if (fields.size() != table.header.size()) {
        raise(ErrorCode::RaggedHeader,
              origin + ": row " + std::to_string(line_no) + " has " +
                  std::to_string(fields.size()) + " fields, header has " +
                  std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(fields));
    }
  }
  require(!table.header.empty(), ErrorCode::RaggedHeader, origin + ": no header row");
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::InvalidSpec, "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path);
}

double parse_number(const std::string& cell, std::size_t row_index,
                    const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    raise(ErrorCode::NonNumericValue,
          "row " + std::to_string(row_index) + ", column '" + column +
              "': cannot parse '" + cell + "'");
  }
  return v;
}

long parse_integer(const std::string& cell, std::size_t row_index,
                   const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    raise(ErrorCode::NonNumericValue,
          "row " + std::to_string(row_index) + ", column '" + column +
              "': cannot parse integer '" + cell + "'");
  }
  return v;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::InvalidSpec, "cannot write file: " + path);
  out << content;
}

std::string format_number(double v, int significant) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, v);
  return buf;
}

}  // namespace paneval
