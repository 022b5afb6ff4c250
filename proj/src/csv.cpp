#include "plaid/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "plaid/error.hpp"

namespace plaid {

// Nine significant digits, shortest form.
std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::initializer_list<std::string_view> header) {
  for (auto h : header) cell(h);
  end_row();
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) {
  for (const auto& h : header) cell(std::string_view(h));
  end_row();
}

void CsvWriter::separator() {
  if (row_open_) text_ += ',';
  row_open_ = true;
}

CsvWriter& CsvWriter::cell(std::string_view text) {
  separator();
  text_ += text;
  return *this;
}

CsvWriter& CsvWriter::cell(double value) {
  separator();
  text_ += format_number(value);
  return *this;
}

CsvWriter& CsvWriter::cell(long long value) {
  separator();
  text_ += std::to_string(value);
  return *this;
}

CsvWriter& CsvWriter::cell(unsigned long long value) {
  separator();
  text_ += std::to_string(value);
  return *this;
}

void CsvWriter::end_row() {
  text_ += '\n';
  row_open_ = false;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      std::vector<std::string> row;
      std::size_t start = 0;
      for (;;) {
        const auto comma = line.find(',', start);
        row.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      rows.push_back(std::move(row));
    }
    pos = end + 1;
  }
  return rows;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace plaid
