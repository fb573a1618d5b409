#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace heavyball {

/// Shortest round-trip decimal representation, identical across platforms.
/// All CSV/JSON output goes through this so reruns are byte-identical.
std::string format_double(double x);

class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::vector<std::string> columns);
  ~CsvWriter();

  void row(const std::vector<double>& values);
  void close();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string buffer_;
  std::size_t n_cols_;
  bool closed_ = false;
};

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace heavyball
