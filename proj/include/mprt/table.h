#ifndef MPRT_TABLE_H_
#define MPRT_TABLE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mprt {

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite.
std::string FormatNumber(double value);
double ParseNumber(const std::string& text);

// In-memory CSV table. Every harness table starts with the columns
// config_hash and seed so that each file identifies the run producing it.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  void Add(std::vector<std::string> row);
  std::size_t Column(const std::string& name) const;  // Throws when absent.
  bool HasColumn(const std::string& name) const;
  const std::string& At(std::size_t row, const std::string& column) const;
  double Number(std::size_t row, const std::string& column) const;

  std::string ToCsv() const;
  static Table FromCsv(const std::string& text);
  void Write(const std::string& path) const;
  static Table Read(const std::string& path);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// A table whose rows are prefixed with the run's config hash and seed.
class RunTable {
 public:
  RunTable(std::string config_hash, std::uint64_t seed, std::vector<std::string> columns);

  void Add(std::vector<std::string> row);
  const Table& table() const { return table_; }
  void Write(const std::string& path) const { table_.Write(path); }

 private:
  std::string hash_;
  std::string seed_;
  Table table_;
};

std::string Cell(double value);
std::string Cell(int value);
std::string Cell(std::size_t value);
inline std::string Cell(const std::string& value) { return value; }
inline std::string Cell(const char* value) { return value; }

void WriteTextFile(const std::string& path, const std::string& text);
std::string ReadTextFile(const std::string& path);

}  // namespace mprt

#endif  // MPRT_TABLE_H_
