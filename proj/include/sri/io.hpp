#ifndef SRI_IO_HPP
#define SRI_IO_HPP

// CSV serialization. Every file opens with a "# schema: ..." comment line
// naming the columns; numbers are written with 17 significant digits so that
// a round trip reproduces the doubles bit for bit.

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sri/di.hpp"
#include "sri/two_timescale.hpp"

namespace sri {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  // strtod rather than stod: stod throws on subnormals, which %.17g does emit.
  if (s.empty()) throw FormatError("not a number: ''");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw FormatError("not a number: '" + s + "'");
  if (*end != '\0') throw FormatError("trailing characters in number: '" + s + "'");
  return v;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw FormatError("missing column '" + name + "'");
  }
};

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> columns, const std::string& note = {})
      : os_(os), width_(columns.size()) {
    os_ << "# schema: ";
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    if (!note.empty()) os_ << " | " << note;
    os_ << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw FormatError("CsvWriter: row width differs from the schema");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << format_double(values[i]);
    os_ << '\n';
  }

 private:
  std::ostream& os_;
  std::size_t width_;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

/// Reads a file written by CsvWriter: schema comment, header row, numeric rows.
inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# schema: ", 0) != 0) throw FormatError("csv: missing schema comment line");
  std::string declared = line.substr(10);
  if (const auto bar = declared.find(" | "); bar != std::string::npos) declared.resize(bar);
  if (!std::getline(is, line)) throw FormatError("csv: missing header row");
  t.columns = detail::split(line, ',');
  if (detail::split(declared, ',') != t.columns) throw FormatError("csv: header row differs from the schema comment");
  std::size_t lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != t.columns.size())
      throw FormatError("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<std::string> trajectory_columns(Eigen::Index d1, Eigen::Index d2) {
  std::vector<std::string> c{"n", "t_fast", "t_slow"};
  for (Eigen::Index i = 0; i < d1; ++i) c.push_back("X" + std::to_string(i));
  for (Eigen::Index i = 0; i < d2; ++i) c.push_back("Y" + std::to_string(i));
  c.emplace_back("S1");
  c.emplace_back("S2");
  for (Eigen::Index i = 0; i < d1; ++i) c.push_back("M1_" + std::to_string(i));
  for (Eigen::Index i = 0; i < d2; ++i) c.push_back("M2_" + std::to_string(i));
  return c;
}

/// Row n holds X_n, Y_n, S_n and the noise of the step that produced row n
/// (zero in row 0). Rows [first, last] are written.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, std::size_t first = 0,
                                 std::optional<std::size_t> last = std::nullopt) {
  if (tr.x.empty()) throw FormatError("write_trajectory_csv: empty trajectory");
  const Eigen::Index d1 = tr.x.front().size(), d2 = tr.y.front().size();
  CsvWriter w(os, trajectory_columns(d1, d2), "M columns: noise of the step into the row, zero in row 0");
  const std::size_t end = std::min(last.value_or(tr.steps()), tr.steps());
  std::vector<double> row;
  for (std::size_t n = first; n <= end; ++n) {
    row.clear();
    row.push_back(static_cast<double>(n));
    row.push_back(tr.t_fast[n]);
    row.push_back(tr.t_slow[n]);
    for (Eigen::Index i = 0; i < d1; ++i) row.push_back(tr.x[n][i]);
    for (Eigen::Index i = 0; i < d2; ++i) row.push_back(tr.y[n][i]);
    row.push_back(static_cast<double>(tr.s1[n]));
    row.push_back(static_cast<double>(tr.s2[n]));
    for (Eigen::Index i = 0; i < d1; ++i) row.push_back(n == 0 ? 0.0 : tr.m1[n - 1][i]);
    for (Eigen::Index i = 0; i < d2; ++i) row.push_back(n == 0 ? 0.0 : tr.m2[n - 1][i]);
    w.row(row);
  }
}

/**
 * Rebuilds a full trajectory (from row 0) written by write_trajectory_csv.
 * Selections are recovered from the update identity; they are exact up to
 * rounding in the division by the step size.
 */
inline Trajectory read_trajectory_csv(std::istream& is, const StepSchedule& schedule) {
  const CsvTable t = read_csv(is);
  Eigen::Index d1 = 0, d2 = 0;
  for (const auto& c : t.columns) {
    if (c.size() > 1 && c[0] == 'X') ++d1;
    if (c.size() > 1 && c[0] == 'Y') ++d2;
  }
  if (t.columns != trajectory_columns(d1, d2)) throw FormatError("trajectory csv: unexpected columns");
  if (t.rows.empty() || t.rows.front()[0] != 0.0) throw FormatError("trajectory csv: must start at row 0");
  Trajectory tr;
  tr.schedule = schedule;
  const auto at = [&](const std::vector<double>& r, Eigen::Index off, Eigen::Index len) {
    Vector v(len);
    for (Eigen::Index i = 0; i < len; ++i) v[i] = r[static_cast<std::size_t>(off + i)];
    return v;
  };
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& r = t.rows[k];
    if (r[0] != static_cast<double>(k)) throw FormatError("trajectory csv: row index gap at " + std::to_string(k));
    tr.t_fast.push_back(r[1]);
    tr.t_slow.push_back(r[2]);
    tr.x.push_back(at(r, 3, d1));
    tr.y.push_back(at(r, 3 + d1, d2));
    tr.s1.push_back(static_cast<std::size_t>(r[static_cast<std::size_t>(3 + d1 + d2)]));
    tr.s2.push_back(static_cast<std::size_t>(r[static_cast<std::size_t>(4 + d1 + d2)]));
    if (k > 0) {
      tr.m1.push_back(at(r, 5 + d1 + d2, d1));
      tr.m2.push_back(at(r, 5 + 2 * d1 + d2, d2));
      const std::size_t n = k - 1;
      tr.v1.push_back((tr.x[k] - tr.x[n]) / schedule.a(n) - tr.m1.back());
      tr.v2.push_back((tr.y[k] - tr.y[n]) / schedule.b(n) - tr.m2.back());
    }
  }
  return tr;
}

inline std::vector<std::string> dipath_columns(Eigen::Index k) {
  std::vector<std::string> c{"t"};
  for (Eigen::Index i = 0; i < k; ++i) c.push_back("z" + std::to_string(i));
  for (Eigen::Index i = 0; i < k; ++i) c.push_back("v" + std::to_string(i));
  return c;
}

inline void write_dipath_csv(std::ostream& os, const DIPath& p, const std::vector<std::string>& extra_columns = {},
                             const std::vector<std::vector<double>>& extra = {}) {
  if (p.size() == 0) throw FormatError("write_dipath_csv: empty path");
  if (extra.size() != extra_columns.size()) throw FormatError("write_dipath_csv: extra column count mismatch");
  for (const auto& col : extra)
    if (col.size() != p.size()) throw FormatError("write_dipath_csv: extra column length differs from the path");
  const Eigen::Index k = p.states.front().size();
  auto cols = dipath_columns(k);
  cols.insert(cols.end(), extra_columns.begin(), extra_columns.end());
  CsvWriter w(os, cols);
  std::vector<double> row;
  for (std::size_t i = 0; i < p.size(); ++i) {
    row.clear();
    row.push_back(p.times[i]);
    for (Eigen::Index j = 0; j < k; ++j) row.push_back(p.states[i][j]);
    for (Eigen::Index j = 0; j < k; ++j) row.push_back(p.velocities[i][j]);
    for (const auto& col : extra) row.push_back(col[i]);
    w.row(row);
  }
}

}  // namespace sri

#endif  // SRI_IO_HPP
