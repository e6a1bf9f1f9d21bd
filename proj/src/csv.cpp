#include "abc/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "abc/errors.hpp"

namespace abc::csv {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw Error(ErrorCode::io, "not a number: '" + text + "'");
  return v;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Document read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  Document doc;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  doc.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != doc.header.size())
      throw Error(ErrorCode::io, path.string() + ": row with " + std::to_string(cells.size()) + " cells, header has " +
                                     std::to_string(doc.header.size()));
    doc.rows.push_back(std::move(cells));
  }
  return doc;
}

void write(const std::filesystem::path& path, const Document& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(doc.header);
  for (const auto& r : doc.rows) emit(r);
}

void write_table(const std::filesystem::path& path, const ReferenceTable& table) {
  Document doc;
  for (Eigen::Index k = 0; k < table.params.cols(); ++k) doc.header.push_back("param_" + std::to_string(k + 1));
  for (Eigen::Index k = 0; k < table.stats.cols(); ++k) doc.header.push_back("stat_" + std::to_string(k + 1));
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index k = 0; k < table.params.cols(); ++k) row.push_back(format_double(table.params(r, k)));
    for (Eigen::Index k = 0; k < table.stats.cols(); ++k) row.push_back(format_double(table.stats(r, k)));
    doc.rows.push_back(std::move(row));
  }
  write(path, doc);
}

ReferenceTable read_table(const std::filesystem::path& path) {
  const Document doc = read(path);
  Eigen::Index p = 0, d = 0;
  for (const auto& h : doc.header) {
    if (h.rfind("param_", 0) == 0) {
      if (d > 0) throw Error(ErrorCode::io, "parameter columns must precede statistic columns");
      ++p;
    } else if (h.rfind("stat_", 0) == 0) {
      ++d;
    } else {
      throw Error(ErrorCode::io, "unexpected column '" + h + "'");
    }
  }
  if (p == 0 || d == 0) throw Error(ErrorCode::io, "table needs param_ and stat_ columns");
  const auto m = static_cast<Eigen::Index>(doc.rows.size());
  ReferenceTable t{Eigen::MatrixXd(m, p), Eigen::MatrixXd(m, d)};
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& row = doc.rows[static_cast<std::size_t>(r)];
    for (Eigen::Index k = 0; k < p; ++k) t.params(r, k) = parse_double(row[static_cast<std::size_t>(k)]);
    for (Eigen::Index k = 0; k < d; ++k) t.stats(r, k) = parse_double(row[static_cast<std::size_t>(p + k)]);
  }
  return t;
}

void write_posterior(const std::filesystem::path& path, const WeightedPosterior& post) {
  Document doc;
  for (Eigen::Index k = 0; k < post.draws.cols(); ++k) doc.header.push_back("param_" + std::to_string(k + 1));
  doc.header.push_back("weight");
  for (Eigen::Index r = 0; r < post.draws.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index k = 0; k < post.draws.cols(); ++k) row.push_back(format_double(post.draws(r, k)));
    row.push_back(format_double(post.weights[static_cast<std::size_t>(r)]));
    doc.rows.push_back(std::move(row));
  }
  write(path, doc);
}

WeightedPosterior read_posterior(const std::filesystem::path& path) {
  const Document doc = read(path);
  if (doc.header.empty() || doc.header.back() != "weight") throw Error(ErrorCode::io, "posterior CSV needs a weight column");
  const auto p = static_cast<Eigen::Index>(doc.header.size() - 1);
  WeightedPosterior post;
  post.draws.resize(static_cast<Eigen::Index>(doc.rows.size()), p);
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    for (Eigen::Index k = 0; k < p; ++k)
      post.draws(static_cast<Eigen::Index>(r), k) = parse_double(doc.rows[r][static_cast<std::size_t>(k)]);
    post.weights.push_back(parse_double(doc.rows[r].back()));
    post.rows.push_back(r);
  }
  return post;
}

}  // namespace abc::csv
