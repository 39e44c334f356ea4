#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace covmag {

inline constexpr const char* version_string = "0.1.0";

// Shortest round-trippable decimal at 17 significant digits.
std::string format_double(double value);

// CSV writer that stamps every file with a "# covmag <version> seed=<seed>"
// comment line so outputs are traceable and byte-stable across reruns.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::uint64_t seed,
            const std::string& header);
  ~CsvWriter();

  void row(const std::vector<double>& values);
  void raw_row(const std::string& line);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Reads a numeric CSV, skipping '#' comment lines; the first non-comment
// line is the header.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace covmag
