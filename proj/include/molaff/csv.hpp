#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace molaff::csv {

using Row = std::vector<std::string>;

struct Document {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Reads a comma-separated file with a header row. Double-quoted fields and
/// doubled quotes inside them are supported; blank lines are skipped.
Document read(const std::filesystem::path& path);

Row split_line(std::string_view line);

/// Shortest round-trip decimal representation; stable across runs.
std::string format_double(double value);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

class Writer {
 public:
  explicit Writer(std::string& out) : out_(out) {}
  void row(const Row& fields);

 private:
  std::string& out_;
};

void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace molaff::csv
