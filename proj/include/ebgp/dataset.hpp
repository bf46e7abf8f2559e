#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ebgp/error.hpp"
#include "ebgp/kernel_gp.hpp"

namespace ebgp {

struct DatasetMeta {
  std::string generator;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
  std::vector<int> component;  // per-point component label (mixed generators)
  std::string note;
};

struct Dataset {
  Matrix X;       // n x D
  Vector Y;
  Vector f_star;  // may be empty when the ground truth is unknown
  double sigma = 0.0;
  DatasetMeta meta;

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
  bool has_truth() const { return f_star.size() == X.rows(); }
};

// Rows selected by index, in the given order.
inline Dataset subset_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), d.X.cols());
  out.Y.resize(static_cast<Eigen::Index>(rows.size()));
  if (d.has_truth()) out.f_star.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    detail::require<InvalidInput>(r < d.X.rows(), "row index out of range");
    const auto o = static_cast<Eigen::Index>(i);
    out.X.row(o) = d.X.row(r);
    out.Y(o) = d.Y(r);
    if (d.has_truth()) out.f_star(o) = d.f_star(r);
  }
  out.sigma = d.sigma;
  out.meta = d.meta;
  out.meta.component.clear();
  if (!d.meta.component.empty())
    for (std::size_t r : rows) out.meta.component.push_back(d.meta.component[r]);
  return out;
}

// Header "x1,...,xD,y,fstar"; fstar left empty when unknown.
inline void write_dataset_csv(std::ostream& os, const Dataset& d) {
  for (Eigen::Index c = 0; c < d.X.cols(); ++c) os << 'x' << (c + 1) << ',';
  os << "y,fstar\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    for (Eigen::Index c = 0; c < d.X.cols(); ++c) os << d.X(i, c) << ',';
    os << d.Y(i) << ',';
    if (d.has_truth()) os << d.f_star(i);
    os << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  detail::require<InvalidInput>(static_cast<bool>(std::getline(is, line)), "dataset CSV is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      header.push_back(cell);
    }
  }
  detail::require<InvalidInput>(header.size() >= 3 && header[header.size() - 2] == "y" && header.back() == "fstar",
                                "dataset CSV header must be x1,...,xD,y,fstar");
  const std::size_t D = header.size() - 2;
  for (std::size_t c = 0; c < D; ++c)
    detail::require<InvalidInput>(header[c] == "x" + std::to_string(c + 1), "dataset CSV header must be x1,...,xD,y,fstar");
  std::vector<double> xs, ys, fs;
  bool truth = true;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    detail::require<InvalidInput>(cells.size() == D + 2, "dataset CSV row has the wrong number of fields");
    try {
      for (std::size_t c = 0; c < D; ++c) xs.push_back(std::stod(cells[c]));
      ys.push_back(std::stod(cells[D]));
      if (cells[D + 1].empty()) truth = false; else fs.push_back(std::stod(cells[D + 1]));
    } catch (const std::logic_error&) {
      throw InvalidInput("dataset CSV contains a non-numeric field");
    }
    ++n;
  }
  detail::require<InvalidInput>(n >= 1, "dataset CSV has no rows");
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < D; ++c)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = xs[i * D + c];
  d.Y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(n));
  if (truth && fs.size() == n) d.f_star = Eigen::Map<const Vector>(fs.data(), static_cast<Eigen::Index>(n));
  d.meta.generator = "csv";
  return d;
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require<InvalidInput>(in.good(), ("cannot open dataset file " + path).c_str());
  return read_dataset_csv(in);
}

}  // namespace ebgp
