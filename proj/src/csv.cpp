#include "spill/csv.hpp"

#include <sstream>

#include "spill/errors.hpp"

namespace spill {

CsvWriter::CsvWriter(const std::string& path) : out_(path), path_(path) {
  if (!out_) throw ConfigError("cannot open for writing: " + path);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(cells[i]);
  }
  out_ << '\n';
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw DataError("write failed: " + path_);
  out_.close();
}

std::string csv_escape(const std::string& cell) {
  bool needs_quote = cell.find_first_of(",\"\n") != std::string::npos;
  if (!needs_quote) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& where) {
  std::vector<std::string> cells;
  std::string cur;
  bool in_quotes = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_quotes) throw FormatError("unterminated quote in " + where);
  cells.push_back(cur);
  return cells;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  CsvTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF) break;
    auto cells = split_line(line, path + ":" + std::to_string(lineno));
    if (lineno == 1) {
      table.header = std::move(cells);
    } else {
      if (cells.size() != table.header.size())
        throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(table.header.size()) + " cells, got " +
                          std::to_string(cells.size()));
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::col_required(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw FormatError("missing CSV column: " + name);
  return c;
}

}  // namespace spill
