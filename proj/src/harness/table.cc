#include "mprt/table.h"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mprt/error.h"

namespace mprt {

std::string FormatNumber(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double ParseNumber(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  Require(ec == std::errc() && end == text.data() + text.size(), ErrorCode::kFormat,
          "not a number: '" + text + "'");
  return value;
}

void Table::Add(std::vector<std::string> row) {
  Require(row.size() == columns_.size(), ErrorCode::kShapeMismatch,
          "row has " + std::to_string(row.size()) + " fields, table has " + std::to_string(columns_.size()));
  rows_.push_back(std::move(row));
}

bool Table::HasColumn(const std::string& name) const {
  for (const auto& c : columns_)
    if (c == name) return true;
  return false;
}

std::size_t Table::Column(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return i;
  Fail(ErrorCode::kFormat, "table has no column '" + name + "'");
}

const std::string& Table::At(std::size_t row, const std::string& column) const {
  return rows_.at(row).at(Column(column));
}

double Table::Number(std::size_t row, const std::string& column) const { return ParseNumber(At(row, column)); }

namespace {

void AppendField(std::string& out, const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void AppendLine(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    AppendField(out, fields[i]);
  }
  out += '\n';
}

}  // namespace

std::string Table::ToCsv() const {
  std::string out;
  AppendLine(out, columns_);
  for (const auto& row : rows_) AppendLine(out, row);
  return out;
}

Table Table::FromCsv(const std::string& text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      field.clear();
      lines.push_back(std::move(fields));
      fields.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  Require(!quoted, ErrorCode::kFormat, "unterminated quote in CSV");
  if (any) {
    fields.push_back(std::move(field));
    lines.push_back(std::move(fields));
  }
  Require(!lines.empty(), ErrorCode::kFormat, "empty CSV");
  Table table(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) table.Add(std::move(lines[i]));
  return table;
}

void Table::Write(const std::string& path) const { WriteTextFile(path, ToCsv()); }

Table Table::Read(const std::string& path) { return FromCsv(ReadTextFile(path)); }

RunTable::RunTable(std::string config_hash, std::uint64_t seed, std::vector<std::string> columns)
    : hash_(std::move(config_hash)), seed_(std::to_string(seed)) {
  columns.insert(columns.begin(), {"config_hash", "seed"});
  table_ = Table(std::move(columns));
}

void RunTable::Add(std::vector<std::string> row) {
  row.insert(row.begin(), {hash_, seed_});
  table_.Add(std::move(row));
}

std::string Cell(double value) { return FormatNumber(value); }
std::string Cell(int value) { return std::to_string(value); }
std::string Cell(std::size_t value) { return std::to_string(value); }

void WriteTextFile(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << text;
  Require(out.good(), ErrorCode::kIo, "write failed: " + path);
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace mprt
