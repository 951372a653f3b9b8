#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mixsel/errors.hpp"

namespace mixsel {

/// Cell of the binary pattern, one-based: m = 1 + sum_j y_j 2^(j-1), in 1..2^d.
class CellIndex {
public:
  constexpr explicit CellIndex(int m) : m_(m) {}

  constexpr int value() const noexcept { return m_; }
  constexpr int zero_based() const noexcept { return m_ - 1; }

  friend constexpr bool operator==(CellIndex, CellIndex) = default;

private:
  int m_;
};

inline constexpr int max_binary_variables = 20;

inline int cell_count(int d) {
  if (d < 0 || d > max_binary_variables)
    throw ValidationError("binary variable count d=" + std::to_string(d) + " outside 0.." +
                          std::to_string(max_binary_variables));
  return 1 << d;
}

template <class Range>
CellIndex encode_cell(const Range& y) {
  int m = 0;
  int j = 0;
  for (const auto v : y) {
    if (v != 0 && v != 1)
      throw ValidationError("binary entry y" + std::to_string(j + 1) + " = " + std::to_string(v) +
                            " is not 0 or 1");
    if (j >= max_binary_variables) throw ValidationError("too many binary variables");
    m |= static_cast<int>(v) << j;
    ++j;
  }
  return CellIndex(m + 1);
}

inline std::vector<std::uint8_t> decode_cell(CellIndex m, int d) {
  const int M = cell_count(d);
  if (m.value() < 1 || m.value() > M)
    throw ValidationError("cell index " + std::to_string(m.value()) + " outside 1.." + std::to_string(M));
  std::vector<std::uint8_t> y(static_cast<std::size_t>(d));
  const int bits = m.zero_based();
  for (int j = 0; j < d; ++j) y[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>((bits >> j) & 1);
  return y;
}

struct MixedObservation {
  Eigen::VectorXd x;
  std::vector<std::uint8_t> y;
  int z = 1;  ///< group label, one-based
};

/// Validated, immutable sample of mixed observations.
class Dataset {
public:
  Dataset(int p, int d, int q, std::vector<MixedObservation> observations)
      : p_(p), d_(d), q_(q), M_(cell_count(d)), obs_(std::move(observations)) {
    if (p_ < 1) throw ValidationError("continuous variable count p must be >= 1");
    if (q_ < 1) throw ValidationError("group count q must be >= 1");
    if (obs_.empty()) throw ValidationError("no observations");
    cells_.reserve(obs_.size());
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      const auto& o = obs_[i];
      const std::string where = "observation " + std::to_string(i + 1) + ": ";
      if (o.x.size() != p_)
        throw ValidationError(where + "expected " + std::to_string(p_) + " continuous values, got " +
                              std::to_string(o.x.size()));
      if (static_cast<int>(o.y.size()) != d_)
        throw ValidationError(where + "expected " + std::to_string(d_) + " binary values, got " +
                              std::to_string(o.y.size()));
      if (!o.x.allFinite()) throw ValidationError(where + "non-finite continuous value");
      if (o.z < 1 || o.z > q_)
        throw ValidationError(where + "group label " + std::to_string(o.z) + " outside 1.." +
                              std::to_string(q_));
      try {
        cells_.push_back(encode_cell(o.y).zero_based());
      } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
      }
    }
  }

  int p() const noexcept { return p_; }
  int d() const noexcept { return d_; }
  int q() const noexcept { return q_; }
  int cells() const noexcept { return M_; }
  int size() const noexcept { return static_cast<int>(obs_.size()); }

  const MixedObservation& operator[](int i) const { return obs_[static_cast<std::size_t>(i)]; }
  const std::vector<MixedObservation>& observations() const noexcept { return obs_; }

  /// Zero-based cell of observation i.
  int cell(int i) const { return cells_[static_cast<std::size_t>(i)]; }
  /// Zero-based group of observation i.
  int group(int i) const { return obs_[static_cast<std::size_t>(i)].z - 1; }

  /// q×M matrix of counts per (group, cell).
  Eigen::MatrixXi stratum_counts() const {
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(q_, M_);
    for (int i = 0; i < size(); ++i) ++counts(group(i), cell(i));
    return counts;
  }

  std::vector<int> group_sizes() const {
    std::vector<int> n(static_cast<std::size_t>(q_), 0);
    for (int i = 0; i < size(); ++i) ++n[static_cast<std::size_t>(group(i))];
    return n;
  }

  /// Copy with observation k removed.
  Dataset without(int k) const {
    std::vector<MixedObservation> rest;
    rest.reserve(obs_.size() - 1);
    for (int i = 0; i < size(); ++i)
      if (i != k) rest.push_back(obs_[static_cast<std::size_t>(i)]);
    return Dataset(p_, d_, q_, std::move(rest));
  }

private:
  int p_;
  int d_;
  int q_;
  int M_;
  std::vector<MixedObservation> obs_;
  std::vector<int> cells_;
};

struct CsvSchema {
  int p = 0;
  int d = 0;
  /// Declared group count; 0 means take the largest label in the file.
  int q = 0;
  std::string group_column = "z";
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, int& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parse CSV text with header x1..xp,y1..yd,<group_column>. Column order is free; extra columns are ignored.
inline Dataset parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source = "<input>") {
  if (schema.p < 1) throw UsageError("schema: p must be >= 1");
  cell_count(schema.d);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM

  const auto header = detail::split_csv_line(line);
  std::unordered_map<std::string, int> position;
  for (std::size_t c = 0; c < header.size(); ++c) position.emplace(std::string(header[c]), static_cast<int>(c));
  auto column = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw ValidationError(source + ": missing column '" + name + "'");
    return it->second;
  };
  std::vector<int> xcol, ycol;
  for (int j = 1; j <= schema.p; ++j) xcol.push_back(column("x" + std::to_string(j)));
  for (int j = 1; j <= schema.d; ++j) ycol.push_back(column("y" + std::to_string(j)));
  const int zcol = column(schema.group_column);

  std::vector<MixedObservation> obs;
  int row = 1;
  int max_label = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = source + ": row " + std::to_string(row) + ": ";
    auto field = [&](int c, const std::string& name) {
      if (c >= static_cast<int>(fields.size()) || fields[static_cast<std::size_t>(c)].empty())
        throw ValidationError(where + "missing value for '" + name + "'");
      return fields[static_cast<std::size_t>(c)];
    };
    MixedObservation o;
    o.x.resize(schema.p);
    for (int j = 0; j < schema.p; ++j) {
      const std::string name = "x" + std::to_string(j + 1);
      double v = 0;
      if (!detail::parse_double(field(xcol[static_cast<std::size_t>(j)], name), v) || !std::isfinite(v))
        throw ValidationError(where + "non-numeric value for '" + name + "'");
      o.x(j) = v;
    }
    o.y.resize(static_cast<std::size_t>(schema.d));
    for (int j = 0; j < schema.d; ++j) {
      const std::string name = "y" + std::to_string(j + 1);
      int v = 0;
      if (!detail::parse_int(field(ycol[static_cast<std::size_t>(j)], name), v) || (v != 0 && v != 1))
        throw ValidationError(where + "non-binary value for '" + name + "'");
      o.y[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(v);
    }
    int z = 0;
    if (!detail::parse_int(field(zcol, schema.group_column), z) || z < 1 || (schema.q > 0 && z > schema.q))
      throw ValidationError(where + "unknown group label '" + std::string(field(zcol, schema.group_column)) + "'");
    o.z = z;
    max_label = std::max(max_label, z);
    obs.push_back(std::move(o));
  }
  if (obs.empty()) throw ValidationError(source + ": no observations");
  return Dataset(schema.p, schema.d, schema.q > 0 ? schema.q : max_label, std::move(obs));
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_csv(in, schema, path);
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
  for (int j = 1; j <= ds.p(); ++j) out << "x" << j << ",";
  for (int j = 1; j <= ds.d(); ++j) out << "y" << j << ",";
  out << "z\n";
  for (const auto& o : ds.observations()) {
    for (int j = 0; j < ds.p(); ++j) out << detail::format_double(o.x(j)) << ",";
    for (const auto v : o.y) out << static_cast<int>(v) << ",";
    out << o.z << "\n";
  }
}

inline void save_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_csv(out, ds);
}

}  // namespace mixsel
