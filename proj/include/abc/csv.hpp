#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "abc/engine.hpp"

namespace abc::csv {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(const std::string& text);

struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Document read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Document& doc);

/// Header `param_1..param_P, stat_1..stat_D`.
void write_table(const std::filesystem::path& path, const ReferenceTable& table);
ReferenceTable read_table(const std::filesystem::path& path);

/// Header `param_1..param_P, weight`.
void write_posterior(const std::filesystem::path& path, const WeightedPosterior& post);
WeightedPosterior read_posterior(const std::filesystem::path& path);

}  // namespace abc::csv
