#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace spill {

// Minimal CSV support for the pipeline's flat outputs. Fields containing
// commas, quotes or newlines are quoted; embedded newlines inside fields are
// not supported on read.

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;        // -1 when absent
  int col_required(const std::string& name) const;  // throws FormatError
};

CsvTable read_csv(const std::string& path);

std::string csv_escape(const std::string& cell);

}  // namespace spill
