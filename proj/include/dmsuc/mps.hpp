#pragma once

// Fixed-format MPS writer and a tolerant whitespace reader.
//
// Field layout follows the classic template (fields starting at columns 2,
// 5, 15, 25, 40, 50); numbers that need more digits than their field simply
// widen it, which every mainstream parser accepts because fields stay
// whitespace-separated.  Generated row/column names are positional
// (R0000001.., C0000001..), so re-imported problems map back by index.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dmsuc/linear_program.hpp"

namespace dmsuc {

namespace detail {

/// Shortest decimal form that parses back to the same double.
inline std::string format_mps_number(double v) {
  char buf[40];
  for (int precision : {10, 17}) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) break;
  }
  return buf;
}

inline void put_field(std::string& line, std::size_t column, const std::string& text) {
  if (line.size() < column) line.resize(column, ' ');
  if (!line.empty() && line.back() != ' ' && line.size() >= column) line += ' ';
  line += text;
}

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

inline double parse_mps_number(const std::string& tok, const char* context) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    require(used == tok.size(), "mps: bad number '", tok, "' in ", context);
    return v;
  } catch (const std::exception&) {
    fail("mps: bad number '", tok, "' in ", context);
  }
}

}  // namespace detail

/// Writes the problem in fixed-format MPS with INTORG/INTEND markers and
/// explicit bounds for every column.
inline void write_mps(const LinearProgram& lp, const std::filesystem::path& path,
                      const std::string& name = "DMSUC") {
  auto report = lp.validate();
  require(report.ok(), "write_mps: invalid problem:\n", report.to_string());
  require(lp.num_cols() > 0 && lp.num_rows() > 0, "write_mps: refusing to export an empty problem");

  auto row_name = [&](int r) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "R%07d", r + 1);
    return std::string(buf);
  };
  auto col_name = [&](int j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "C%07d", j + 1);
    return std::string(buf);
  };

  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << "NAME          " << name << "\n";

  out << "ROWS\n";
  out << " N  COST\n";
  for (int r = 0; r < lp.num_rows(); ++r) {
    char sense;
    switch (lp.row_sense(r)) {
      case RowSense::LE: sense = 'L'; break;
      case RowSense::GE: sense = 'G'; break;
      case RowSense::EQ: sense = 'E'; break;
      case RowSense::Range: sense = 'L'; break;  // upper as rhs, RANGES adds the lower
    }
    out << " " << sense << "  " << row_name(r) << "\n";
  }

  CscMatrix csc = CscMatrix::from(lp);
  out << "COLUMNS\n";
  bool in_integer = false;
  int marker = 0;
  for (int j = 0; j < lp.num_cols(); ++j) {
    bool integer = lp.is_integer[static_cast<std::size_t>(j)] != 0;
    if (integer != in_integer) {
      std::string line;
      detail::put_field(line, 4, "MARKER" + std::to_string(marker++));
      detail::put_field(line, 14, "'MARKER'");
      detail::put_field(line, 39, integer ? "'INTORG'" : "'INTEND'");
      out << line << "\n";
      in_integer = integer;
    }
    std::vector<std::pair<std::string, double>> entries;
    if (lp.obj[static_cast<std::size_t>(j)] != 0.0)
      entries.emplace_back("COST", lp.obj[static_cast<std::size_t>(j)]);
    for (int k = csc.col_start[static_cast<std::size_t>(j)];
         k < csc.col_start[static_cast<std::size_t>(j) + 1]; ++k)
      entries.emplace_back(row_name(csc.row_idx[static_cast<std::size_t>(k)]),
                           csc.values[static_cast<std::size_t>(k)]);
    for (std::size_t e = 0; e < entries.size(); e += 2) {
      std::string line;
      detail::put_field(line, 4, col_name(j));
      detail::put_field(line, 14, entries[e].first);
      detail::put_field(line, 24, detail::format_mps_number(entries[e].second));
      if (e + 1 < entries.size()) {
        detail::put_field(line, 39, entries[e + 1].first);
        detail::put_field(line, 49, detail::format_mps_number(entries[e + 1].second));
      }
      out << line << "\n";
    }
    if (entries.empty()) {
      // Column with no matrix entries still needs to exist.
      std::string line;
      detail::put_field(line, 4, col_name(j));
      detail::put_field(line, 14, "COST");
      detail::put_field(line, 24, "0.0");
      out << line << "\n";
    }
  }
  if (in_integer) {
    std::string line;
    detail::put_field(line, 4, "MARKER" + std::to_string(marker++));
    detail::put_field(line, 14, "'MARKER'");
    detail::put_field(line, 39, "'INTEND'");
    out << line << "\n";
  }

  out << "RHS\n";
  for (int r = 0; r < lp.num_rows(); ++r) {
    double rhs;
    switch (lp.row_sense(r)) {
      case RowSense::LE:
      case RowSense::Range: rhs = lp.row_upper[static_cast<std::size_t>(r)]; break;
      case RowSense::GE: rhs = lp.row_lower[static_cast<std::size_t>(r)]; break;
      case RowSense::EQ: rhs = lp.row_lower[static_cast<std::size_t>(r)]; break;
    }
    if (rhs == 0.0) continue;
    std::string line;
    detail::put_field(line, 4, "RHS");
    detail::put_field(line, 14, row_name(r));
    detail::put_field(line, 24, detail::format_mps_number(rhs));
    out << line << "\n";
  }
  if (lp.obj_offset != 0.0) {
    std::string line;
    detail::put_field(line, 4, "RHS");
    detail::put_field(line, 14, "COST");
    detail::put_field(line, 24, detail::format_mps_number(-lp.obj_offset));
    out << line << "\n";
  }

  bool any_range = false;
  for (int r = 0; r < lp.num_rows(); ++r)
    if (lp.row_sense(r) == RowSense::Range) any_range = true;
  if (any_range) {
    out << "RANGES\n";
    for (int r = 0; r < lp.num_rows(); ++r) {
      if (lp.row_sense(r) != RowSense::Range) continue;
      std::string line;
      detail::put_field(line, 4, "RNG");
      detail::put_field(line, 14, row_name(r));
      detail::put_field(line, 24,
                        detail::format_mps_number(lp.row_upper[static_cast<std::size_t>(r)] -
                                                  lp.row_lower[static_cast<std::size_t>(r)]));
      out << line << "\n";
    }
  }

  out << "BOUNDS\n";
  for (int j = 0; j < lp.num_cols(); ++j) {
    double lo = lp.col_lower[static_cast<std::size_t>(j)];
    double hi = lp.col_upper[static_cast<std::size_t>(j)];
    auto bound_line = [&](const char* type, bool with_value, double value) {
      std::string line;
      detail::put_field(line, 1, type);
      detail::put_field(line, 4, "BND");
      detail::put_field(line, 14, col_name(j));
      if (with_value) detail::put_field(line, 24, detail::format_mps_number(value));
      out << line << "\n";
    };
    if (lo == hi) {
      bound_line("FX", true, lo);
      continue;
    }
    if (lo == -kInfinity && hi == kInfinity) {
      bound_line("FR", false, 0.0);
      continue;
    }
    if (lo == -kInfinity)
      bound_line("MI", false, 0.0);
    else
      bound_line("LO", true, lo);
    if (hi == kInfinity)
      bound_line("PL", false, 0.0);
    else
      bound_line("UP", true, hi);
  }
  out << "ENDATA\n";
  require(out.good(), "failed writing ", path.string());
}

/// Reads an MPS file (fixed or free format).  Defaults: columns in [0, inf),
/// integer columns without explicit bounds in [0, 1].
inline LinearProgram read_mps(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open MPS file ", path.string());

  LinearProgram lp;
  std::map<std::string, int> row_index;
  std::map<std::string, int> col_index;
  std::map<std::string, char> row_sense;
  std::string objective_row;
  std::vector<char> has_explicit_bound;

  enum Section { None, Rows, Columns, Rhs, Ranges, Bounds, Done } section = None;
  bool in_integer = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '*') continue;
    bool header = !std::isspace(static_cast<unsigned char>(line[0]));
    auto tokens = detail::tokenize(line);
    if (tokens.empty()) continue;
    if (header) {
      const std::string& word = tokens[0];
      if (word == "NAME") continue;
      if (word == "ROWS") { section = Rows; continue; }
      if (word == "COLUMNS") { section = Columns; continue; }
      if (word == "RHS") { section = Rhs; continue; }
      if (word == "RANGES") { section = Ranges; continue; }
      if (word == "BOUNDS") { section = Bounds; continue; }
      if (word == "ENDATA") { section = Done; break; }
      if (word == "OBJSENSE" || word == "OBJSENSE:") { section = None; continue; }
      fail("mps:", line_no, ": unknown section '", word, "'");
    }
    switch (section) {
      case Rows: {
        require(tokens.size() >= 2, "mps:", line_no, ": malformed ROWS line");
        char sense = static_cast<char>(std::toupper(static_cast<unsigned char>(tokens[0][0])));
        const std::string& name = tokens[1];
        if (sense == 'N') {
          if (objective_row.empty()) objective_row = name;
          continue;
        }
        require(sense == 'L' || sense == 'G' || sense == 'E', "mps:", line_no,
                ": bad row sense '", tokens[0], "'");
        int r = lp.add_row(sense == 'L' ? -kInfinity : 0.0, sense == 'G' ? kInfinity : 0.0, name);
        if (sense == 'L') lp.row_upper[static_cast<std::size_t>(r)] = 0.0;
        if (sense == 'G') lp.row_lower[static_cast<std::size_t>(r)] = 0.0;
        if (sense == 'E') {
          lp.row_lower[static_cast<std::size_t>(r)] = 0.0;
          lp.row_upper[static_cast<std::size_t>(r)] = 0.0;
        }
        row_index[name] = r;
        row_sense[name] = sense;
        break;
      }
      case Columns: {
        if (tokens.size() >= 3 && tokens[1] == "'MARKER'") {
          if (tokens[2] == "'INTORG'") in_integer = true;
          else if (tokens[2] == "'INTEND'") in_integer = false;
          continue;
        }
        require(tokens.size() >= 3 && tokens.size() % 2 == 1, "mps:", line_no,
                ": malformed COLUMNS line");
        const std::string& cname = tokens[0];
        auto it = col_index.find(cname);
        int j;
        if (it == col_index.end()) {
          j = lp.add_col(0.0, in_integer ? 1.0 : kInfinity, 0.0, in_integer, cname);
          col_index[cname] = j;
          has_explicit_bound.push_back(0);
        } else {
          j = it->second;
        }
        for (std::size_t k = 1; k + 1 < tokens.size() + 1 && k + 1 <= tokens.size(); k += 2) {
          const std::string& rname = tokens[k];
          double value = detail::parse_mps_number(tokens[k + 1], "COLUMNS");
          if (rname == objective_row) {
            lp.obj[static_cast<std::size_t>(j)] += value;
          } else {
            auto rit = row_index.find(rname);
            require(rit != row_index.end(), "mps:", line_no, ": unknown row '", rname, "'");
            lp.add_entry(rit->second, j, value);
          }
        }
        break;
      }
      case Rhs: {
        require(tokens.size() >= 3 && tokens.size() % 2 == 1, "mps:", line_no,
                ": malformed RHS line");
        for (std::size_t k = 1; k + 1 <= tokens.size() - 1; k += 2) {
          const std::string& rname = tokens[k];
          double value = detail::parse_mps_number(tokens[k + 1], "RHS");
          if (rname == objective_row) {
            lp.obj_offset = -value;
            continue;
          }
          auto rit = row_index.find(rname);
          require(rit != row_index.end(), "mps:", line_no, ": unknown row '", rname, "'");
          int r = rit->second;
          switch (row_sense[rname]) {
            case 'L': lp.row_upper[static_cast<std::size_t>(r)] = value; break;
            case 'G': lp.row_lower[static_cast<std::size_t>(r)] = value; break;
            case 'E':
              lp.row_lower[static_cast<std::size_t>(r)] = value;
              lp.row_upper[static_cast<std::size_t>(r)] = value;
              break;
          }
        }
        break;
      }
      case Ranges: {
        require(tokens.size() >= 3, "mps:", line_no, ": malformed RANGES line");
        for (std::size_t k = 1; k + 1 <= tokens.size() - 1; k += 2) {
          const std::string& rname = tokens[k];
          double range = detail::parse_mps_number(tokens[k + 1], "RANGES");
          auto rit = row_index.find(rname);
          require(rit != row_index.end(), "mps:", line_no, ": unknown row '", rname, "'");
          int r = rit->second;
          switch (row_sense[rname]) {
            case 'L':
              lp.row_lower[static_cast<std::size_t>(r)] =
                  lp.row_upper[static_cast<std::size_t>(r)] - std::fabs(range);
              break;
            case 'G':
              lp.row_upper[static_cast<std::size_t>(r)] =
                  lp.row_lower[static_cast<std::size_t>(r)] + std::fabs(range);
              break;
            case 'E':
              if (range >= 0)
                lp.row_upper[static_cast<std::size_t>(r)] =
                    lp.row_lower[static_cast<std::size_t>(r)] + range;
              else
                lp.row_lower[static_cast<std::size_t>(r)] =
                    lp.row_upper[static_cast<std::size_t>(r)] + range;
              break;
          }
        }
        break;
      }
      case Bounds: {
        require(tokens.size() >= 3, "mps:", line_no, ": malformed BOUNDS line");
        std::string type = tokens[0];
        for (auto& c : type) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        const std::string& cname = tokens[2];
        auto cit = col_index.find(cname);
        require(cit != col_index.end(), "mps:", line_no, ": unknown column '", cname, "'");
        int j = cit->second;
        if (!has_explicit_bound[static_cast<std::size_t>(j)] &&
            lp.is_integer[static_cast<std::size_t>(j)]) {
          // explicit bounds override the implicit [0,1] integer default
          lp.col_upper[static_cast<std::size_t>(j)] = kInfinity;
        }
        has_explicit_bound[static_cast<std::size_t>(j)] = 1;
        double value = tokens.size() >= 4 ? detail::parse_mps_number(tokens[3], "BOUNDS") : 0.0;
        if (type == "UP") lp.col_upper[static_cast<std::size_t>(j)] = value;
        else if (type == "LO") lp.col_lower[static_cast<std::size_t>(j)] = value;
        else if (type == "FX") {
          lp.col_lower[static_cast<std::size_t>(j)] = value;
          lp.col_upper[static_cast<std::size_t>(j)] = value;
        } else if (type == "FR") {
          lp.col_lower[static_cast<std::size_t>(j)] = -kInfinity;
          lp.col_upper[static_cast<std::size_t>(j)] = kInfinity;
        } else if (type == "MI") {
          lp.col_lower[static_cast<std::size_t>(j)] = -kInfinity;
        } else if (type == "PL") {
          lp.col_upper[static_cast<std::size_t>(j)] = kInfinity;
        } else if (type == "BV") {
          lp.is_integer[static_cast<std::size_t>(j)] = 1;
          lp.col_lower[static_cast<std::size_t>(j)] = 0.0;
          lp.col_upper[static_cast<std::size_t>(j)] = 1.0;
        } else if (type == "UI") {
          lp.is_integer[static_cast<std::size_t>(j)] = 1;
          lp.col_upper[static_cast<std::size_t>(j)] = value;
        } else if (type == "LI") {
          lp.is_integer[static_cast<std::size_t>(j)] = 1;
          lp.col_lower[static_cast<std::size_t>(j)] = value;
        } else {
          fail("mps:", line_no, ": unsupported bound type '", type, "'");
        }
        break;
      }
      case None:
      case Done:
        break;
    }
  }
  require(section == Done, "mps: missing ENDATA in ", path.string());
  require(lp.num_cols() > 0, "mps: no columns in ", path.string());
  return lp;
}

}  // namespace dmsuc
