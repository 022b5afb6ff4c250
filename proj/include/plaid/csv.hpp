#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace plaid {

/// Nine significant digits, '.' decimal separator.
std::string format_number(double value);

/// Builds `\n`-terminated CSV text.
class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string_view> header);
  explicit CsvWriter(const std::vector<std::string>& header);

  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(double value);
  CsvWriter& cell(long long value);
  CsvWriter& cell(unsigned long long value);
  CsvWriter& cell(int value) { return cell(static_cast<long long>(value)); }
  CsvWriter& cell(std::size_t value) { return cell(static_cast<unsigned long long>(value)); }
  CsvWriter& empty_cell() { return cell(std::string_view{}); }
  void end_row();

  const std::string& str() const { return text_; }

 private:
  void separator();

  std::string text_;
  bool row_open_ = false;
};

std::vector<std::vector<std::string>> parse_csv(std::string_view text);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace plaid
