#include "molaff/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "molaff/error.hpp"

namespace molaff::csv {

Row split_line(std::string_view line) {
  Row fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorKind::MalformedCsv, "unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

Document read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());

  Document doc;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (line.empty()) continue;
    Row row;
    try {
      row = split_line(line);
    } catch (const Error& e) {
      throw Error(ErrorKind::MalformedCsv, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      doc.header = std::move(row);
      have_header = true;
      continue;
    }
    if (row.size() != doc.header.size()) {
      throw Error(ErrorKind::MalformedCsv, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                               std::to_string(doc.header.size()) + " fields, got " +
                                               std::to_string(row.size()));
    }
    doc.rows.push_back(std::move(row));
    doc.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorKind::MalformedCsv, path.string() + ": missing header row");
  return doc;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void Writer::row(const Row& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_.push_back(',');
    out_ += escape(fields[i]);
  }
  out_.push_back('\n');
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::MissingFile, "cannot open for writing: " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace molaff::csv
