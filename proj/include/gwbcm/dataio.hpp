#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gwbcm/errors.hpp"
#include "gwbcm/network.hpp"
#include "gwbcm/rng.hpp"
#include "gwbcm/simplex_qp.hpp"

namespace gwbcm {

struct PointCloud {
  Matrix coords;  // M x d
  Vector masses;  // positive, sums to 1

  Index size() const { return coords.rows(); }
  Index dim() const { return coords.cols(); }
};

inline PointCloud make_point_cloud(Matrix coords, Vector masses = Vector()) {
  if (coords.rows() == 0) throw EmptyInput("point cloud has no points");
  if (masses.size() == 0)
    masses = Vector::Constant(coords.rows(), 1.0 / static_cast<double>(coords.rows()));
  if (masses.size() != coords.rows())
    throw DimensionMismatch("mass vector length does not match point count");
  if ((masses.array() <= 0).any()) throw BadMassColumn("nonpositive mass");
  masses /= masses.sum();
  return PointCloud{std::move(coords), std::move(masses)};
}

struct LoadOptions {
  // nullopt: infer (2 columns -> 2D, 3 -> 3D, 4 -> 3D + mass). Set true to
  // force the last column to be read as point masses.
  std::optional<bool> mass_column;
};

namespace detail {

inline bool numeric_token(const std::string& tok) {
  char* end = nullptr;
  std::strtod(tok.c_str(), &end);
  return end != tok.c_str() && *end == '\0';
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto from = field.find_first_not_of(" \t\r");
    if (from == std::string::npos) {
      out.push_back("");
      continue;
    }
    const auto to = field.find_last_not_of(" \t\r");
    out.push_back(field.substr(from, to - from + 1));
  }
  return out;
}

}  // namespace detail

// Point-cloud CSV: one point per row, d in {2,3} coordinate columns plus an
// optional trailing mass column. No header is required; a header line is
// auto-detected by a non-numeric first token. Row order is preserved.
inline PointCloud load_point_cloud(const std::string& path,
                                   const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const auto tokens = detail::split_csv_row(line);
    if (rows.empty() && !tokens.empty() && !detail::numeric_token(tokens[0]))
      continue;  // header
    std::vector<double> row;
    row.reserve(tokens.size());
    for (const auto& tok : tokens) {
      if (!detail::numeric_token(tok))
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": not a number: '" + tok + "'");
      row.push_back(std::strtod(tok.c_str(), nullptr));
    }
    if (row.empty())
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty row");
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(width) + " fields, got " +
                       std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyFile(path);

  bool has_mass;
  if (options.mass_column.has_value()) {
    has_mass = *options.mass_column;
  } else {
    has_mass = width == 4;  // 2 -> 2D, 3 -> 3D, 4 -> 3D + mass
  }
  const std::size_t d = width - (has_mass ? 1 : 0);
  if (d < 2 || d > 3)
    throw ParseError(path + ": expected 2 or 3 coordinate columns, got " +
                     std::to_string(d));

  Matrix coords(static_cast<Index>(rows.size()), static_cast<Index>(d));
  Vector masses;
  if (has_mass) masses.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j)
      coords(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    if (has_mass) {
      const double mass = rows[i][d];
      if (!(mass > 0) || !std::isfinite(mass))
        throw BadMassColumn(path + ": row " + std::to_string(i + 1));
      masses[static_cast<Index>(i)] = mass;
    }
  }
  return make_point_cloud(std::move(coords), std::move(masses));
}

// Euclidean distance matrix of a point cloud: symmetric, zero diagonal.
inline Network pairwise_distance_network(const PointCloud& pc) {
  const Index m = pc.size();
  Matrix w = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) {
      w(i, j) = (pc.coords.row(i) - pc.coords.row(j)).norm();
      w(j, i) = w(i, j);
    }
  return validate_network(std::move(w), pc.masses);
}

// Uniform sample on the probability simplex, reproducible from the seed.
inline SimplexWeights sample_simplex_dirichlet(Index s, std::uint64_t seed) {
  if (s < 1) throw EmptyVector("simplex dimension must be at least 1");
  Rng rng(seed);
  return SimplexWeights{rng.dirichlet(s)};
}

// Occlusion masks: a ball (circle/sphere) or an axis-aligned box.
struct OcclusionMask {
  enum class Kind { ball, box };
  Kind kind = Kind::ball;
  Vector center;  // ball
  double radius = 0.0;
  Vector lo, hi;  // box corners

  static OcclusionMask ball(Vector center, double radius) {
    OcclusionMask m;
    m.kind = Kind::ball;
    m.center = std::move(center);
    m.radius = radius;
    return m;
  }
  static OcclusionMask box(Vector lo, Vector hi) {
    OcclusionMask m;
    m.kind = Kind::box;
    m.lo = std::move(lo);
    m.hi = std::move(hi);
    return m;
  }

  bool contains(const Eigen::RowVectorXd& x) const {
    if (kind == Kind::ball)
      return (x.transpose() - center).norm() <= radius;
    for (Index k = 0; k < x.size(); ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
  }
};

// Removes the points inside the mask and renormalizes the remaining masses.
inline PointCloud occlude(const PointCloud& pc, const OcclusionMask& mask) {
  std::vector<Index> kept;
  for (Index i = 0; i < pc.size(); ++i)
    if (!mask.contains(pc.coords.row(i))) kept.push_back(i);
  if (kept.empty()) throw AllPointsRemoved("mask covers the whole cloud");
  Matrix coords(static_cast<Index>(kept.size()), pc.dim());
  Vector masses(static_cast<Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    coords.row(static_cast<Index>(i)) = pc.coords.row(kept[i]);
    masses[static_cast<Index>(i)] = pc.masses[kept[i]];
  }
  masses /= masses.sum();
  return PointCloud{std::move(coords), std::move(masses)};
}

// Canonical on-disk network format:
//   {"size": M, "weights": [[row-major floats]], "masses": [floats]}
// Doubles are emitted with shortest round-trip precision, so save/load is
// lossless for finite values.
inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json weights = nlohmann::json::array();
  for (Index i = 0; i < net.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < net.size(); ++j) row.push_back(net.weights(i, j));
    weights.push_back(std::move(row));
  }
  nlohmann::json masses = nlohmann::json::array();
  for (Index i = 0; i < net.size(); ++i) masses.push_back(net.masses[i]);
  return nlohmann::json{{"size", net.size()},
                        {"weights", std::move(weights)},
                        {"masses", std::move(masses)}};
}

inline Network network_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("size") || !j.contains("weights") ||
      !j.contains("masses"))
    throw SchemaError("network object needs 'size', 'weights' and 'masses'");
  const Index m = j.at("size").get<Index>();
  const auto& weights = j.at("weights");
  const auto& masses = j.at("masses");
  if (!weights.is_array() || static_cast<Index>(weights.size()) != m)
    throw SchemaError("'weights' must be a " + std::to_string(m) + "-row array");
  if (!masses.is_array() || static_cast<Index>(masses.size()) != m)
    throw SchemaError("'masses' must have length " + std::to_string(m));
  Matrix w(m, m);
  for (Index i = 0; i < m; ++i) {
    const auto& row = weights.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != m)
      throw SchemaError("weights row " + std::to_string(i) + " has wrong length");
    for (Index jcol = 0; jcol < m; ++jcol)
      w(i, jcol) = row.at(static_cast<std::size_t>(jcol)).get<double>();
  }
  Vector p(m);
  for (Index i = 0; i < m; ++i) p[i] = masses.at(static_cast<std::size_t>(i)).get<double>();
  return validate_network(std::move(w), std::move(p));
}

inline void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << network_to_json(net).dump(2) << "\n";
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return network_from_json(j);
}

// Canonical lambda-result format:
//   {"lambda": [...], "residual": r, "normalized_residual": r^,
//    "method": "fixed_point"|"blowup", "seed": n}
inline nlohmann::json lambda_result_to_json(const Vector& lambda, double residual,
                                            double normalized_residual,
                                            const std::string& method,
                                            std::uint64_t seed) {
  nlohmann::json lam = nlohmann::json::array();
  for (Index i = 0; i < lambda.size(); ++i) lam.push_back(lambda[i]);
  return nlohmann::json{{"lambda", std::move(lam)},
                        {"residual", residual},
                        {"normalized_residual", normalized_residual},
                        {"method", method},
                        {"seed", seed}};
}

}  // namespace gwbcm
