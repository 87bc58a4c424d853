#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "netgate/error.hpp"
#include "netgate/features.hpp"
#include "netgate/format.hpp"
#include "netgate/graph.hpp"

namespace netgate {

// Parsed units file: header id,w,y followed by any number of numeric
// covariate columns. Rows keep file order; that order becomes the internal
// unit index when the graph is loaded against these ids.
struct UnitTable {
  std::vector<ExternalId> ids;
  std::vector<std::uint8_t> w;
  std::vector<double> y;
  std::shared_ptr<CovariateTable> covariates = std::make_shared<CovariateTable>();
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  for (;;) {
    auto c = line.find(',');
    out.push_back(trim(line.substr(0, c)));
    if (c == std::string_view::npos) break;
    line = line.substr(c + 1);
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t lineno, std::string_view column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("column '" + std::string(column) + "': '" + std::string(tok) + "' is not a number", lineno);
  return v;
}

}  // namespace detail

inline UnitTable read_unit_table(std::istream& in) {
  UnitTable t;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) break;
  }
  for (auto h : detail::split_csv(line)) header.emplace_back(h);
  if (header.size() < 3 || header[0] != "id" || header[1] != "w" || header[2] != "y")
    throw ParseError("units header must start with id,w,y", lineno);
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError("empty covariate column name", lineno);
    t.covariates->names.push_back(header[c]);
    t.covariates->columns.emplace_back();
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()), lineno);
    ExternalId id = 0;
    if (!detail::parse_id(f[0], id)) throw ParseError("unit id must be a nonnegative integer", lineno);
    t.ids.push_back(id);
    if (f[1] != "0" && f[1] != "1") throw ParseError("treatment must be 0 or 1", lineno);
    t.w.push_back(f[1] == "1" ? 1 : 0);
    t.y.push_back(detail::parse_double(f[2], lineno, "y"));
    for (std::size_t c = 3; c < f.size(); ++c)
      t.covariates->columns[c - 3].push_back(detail::parse_double(f[c], lineno, header[c]));
  }
  if (t.ids.empty()) throw DataError("units file has no rows");
  return t;
}

inline UnitTable read_unit_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open units file '" + path + "'");
  return read_unit_table(in);
}

inline void write_unit_table(std::ostream& out, const UnitTable& t) {
  out << "id,w,y";
  for (const auto& n : t.covariates->names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    out << t.ids[i] << ',' << int(t.w[i]) << ',' << format_double(t.y[i]);
    for (const auto& col : t.covariates->columns) out << ',' << format_double(col[i]);
    out << '\n';
  }
}

}  // namespace netgate
