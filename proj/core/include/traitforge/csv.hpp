#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace traitforge::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

Table read_file(const std::filesystem::path& path);
Table parse(const std::string& text);

std::string escape(const std::string& field);
std::string join_row(const std::vector<std::string>& fields);
void write_file(const std::filesystem::path& path, const Table& table);

}  // namespace traitforge::csv
