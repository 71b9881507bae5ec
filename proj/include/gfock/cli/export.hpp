#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gfock/error.hpp"
#include "gfock/kinetics.hpp"

namespace gfock::cli {

enum class Format { Csv, Json };

/// %.17g: enough digits to round-trip any double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

/// Header `t,p_<n_min>,...,p_<n_max>,leakage`, one row per sample.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  os << "t";
  for (long n = traj.window.n_min(); n <= traj.window.n_max(); ++n) os << ",p_" << n;
  os << ",leakage\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << format_double(traj.times[i]);
    const auto& p = traj.states[i].p;
    for (Eigen::Index k = 0; k < p.size(); ++k) os << ',' << format_double(p(k));
    os << ',' << format_double(traj.leakage[i]) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json trajectory_json(const Trajectory& traj) {
  nlohmann::ordered_json j;
  j["window"] = {traj.window.n_min(), traj.window.n_max()};
  j["t"] = traj.times;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& s : traj.states) rows.push_back(std::vector<double>(s.p.data(), s.p.data() + s.p.size()));
  j["p"] = std::move(rows);
  j["leakage"] = traj.leakage;
  j["escaped"] = traj.escaped;
  return j;
}

inline std::string dump_json(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline void export_trajectory(const Trajectory& traj, Format format, const std::filesystem::path& path) {
  write_text(path, format == Format::Csv ? trajectory_csv(traj) : dump_json(trajectory_json(traj)));
}

inline void export_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  write_text(path, dump_json(j));
}

}  // namespace gfock::cli
