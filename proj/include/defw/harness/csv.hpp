#pragma once

// Metrics CSV: fixed base columns followed by per-kind extra columns.

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "defw/defw.hpp"
#include "defw/error.hpp"

namespace defw::harness {

inline const std::vector<std::string>& base_columns() {
  static const std::vector<std::string> cols = {
      "iter",        "objective",  "gap",          "consensus_err", "grad_consensus_err",
      "bound_cp",    "bound_cg",   "nnz_or_rank",  "comm_reals",    "comm_indices",
      "wall_ms",     "tracking_err", "nnz_or_rank_max"};
  return cols;
}

/// Shortest text that round-trips the double exactly.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<double> base_values(const IterationRecord& r) {
  return {static_cast<double>(r.iter),
          r.objective,
          r.gap,
          r.consensus_err,
          r.grad_consensus_err,
          r.bound_cp,
          r.bound_cg,
          static_cast<double>(r.nnz_or_rank),
          r.comm_reals,
          r.comm_indices,
          r.wall_ms,
          r.tracking_err,
          static_cast<double>(r.nnz_or_rank_max)};
}

/// Extra columns are looked up by name in each record; missing ones print "nan".
inline void write_metrics_csv(std::ostream& os, const RunMetrics& metrics, const std::vector<std::string>& extra_columns) {
  const auto& base = base_columns();
  for (std::size_t k = 0; k < base.size(); ++k) os << (k ? "," : "") << base[k];
  for (const auto& c : extra_columns) os << ',' << c;
  os << '\n';
  for (const auto& rec : metrics.records) {
    const auto vals = base_values(rec);
    os << rec.iter;
    for (std::size_t k = 1; k < vals.size(); ++k) os << ',' << format_real(vals[k]);
    for (const auto& c : extra_columns) os << ',' << format_real(rec.extra(c));
    os << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    std::string known;
    for (const auto& h : header) known += (known.empty() ? "" : ", ") + h;
    throw ConfigError("column '" + name + "' not found; available: " + known);
  }

  /// (iter, value) pairs for one column.
  std::vector<std::pair<double, double>> series(const std::string& name) const {
    const std::size_t it = column("iter");
    const std::size_t k = column(name);
    std::vector<std::pair<double, double>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.emplace_back(r[it], r[k]);
    return out;
  }
};

inline double parse_real(const std::string& tok, std::size_t line) {
  if (tok == "nan") return std::nan("");
  if (tok == "inf") return INFINITY;
  if (tok == "-inf") return -INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw ParseError("bad number '" + tok + "'", line);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad number '" + tok + "'", line);
  }
}

inline CsvTable read_metrics_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto toks = split(line);
    if (table.header.empty()) {
      table.header = std::move(toks);
      continue;
    }
    if (toks.size() != table.header.size())
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, got " +
                           std::to_string(toks.size()),
                       line_no);
    std::vector<double> row;
    row.reserve(toks.size());
    for (const auto& t : toks) row.push_back(parse_real(t, line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ParseError("empty CSV", line_no);
  return table;
}

}  // namespace defw::harness
