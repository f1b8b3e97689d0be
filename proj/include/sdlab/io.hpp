// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdlab/distill.hpp"
#include "sdlab/metrics.hpp"

namespace sdlab {

// Shortest exact decimal representation; trajectory files must be
// byte-reproducible across runs with the same seed.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string serialize_trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  const int n = traj.points.empty() ? 0 : static_cast<int>(traj.points.front().theta.size());
  out << "step";
  for (int i = 0; i < n; ++i) out << ",theta_" << i;
  out << ",grad_norm\n";
  for (const auto& p : traj.points) {
    out << p.step;
    for (int i = 0; i < n; ++i) out << "," << format_double(p.theta[i]);
    out << "," << format_double(p.grad_norm) << "\n";
  }
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty trajectory file");
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() < 3) throw std::runtime_error(path + ": malformed trajectory row");
    TrajectoryPoint p;
    p.step = static_cast<int>(row.front());
    p.grad_norm = row.back();
    p.theta = Eigen::Map<const Vec>(row.data() + 1, static_cast<Eigen::Index>(row.size()) - 2);
    traj.points.push_back(std::move(p));
  }
  if (traj.points.empty()) throw std::runtime_error(path + ": trajectory has no rows");
  traj.final_theta = traj.points.back().theta;
  return traj;
}

// Raw sample matrix: one vector per row, comma separated; a leading
// non-numeric header row is skipped.
inline Mat read_samples_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw std::runtime_error(path + ": non-numeric cell in sample row");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ": ragged sample rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no samples");
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows.front().size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline nlohmann::json metric_record_json(const MetricRecord& r, int step) {
  nlohmann::json j;
  j["step"] = step;
  j["fid"] = r.fid;
  j["iq"] = r.iq;
  j["iv"] = r.iv;
  if (r.ig)
    j["ig"] = *r.ig;
  else
    j["ig"] = nullptr;
  j["trace_cov"] = r.trace_cov;
  j["mean_err"] = r.mean_err;
  return j;
}

}  // namespace sdlab
