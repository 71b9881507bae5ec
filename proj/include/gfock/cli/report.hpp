#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gfock/error.hpp"

namespace gfock::cli {

enum class CheckStatus { Pass, Fail, Info, InsufficientStatistics };

inline std::string status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Info: return "info";
    case CheckStatus::InsufficientStatistics: return "insufficient statistics";
  }
  return "unknown";
}

struct Check {
  std::string name;
  CheckStatus status = CheckStatus::Info;
  double deviation = 0.0;
  double tolerance = 0.0;
  std::string note;
};

/// Ordered list of executed checks; each name appears once.
class RunReport {
 public:
  explicit RunReport(std::string command = {}) : command_(std::move(command)) {}

  const std::string& command() const noexcept { return command_; }
  const std::vector<Check>& checks() const noexcept { return checks_; }
  const std::vector<std::pair<std::string, double>>& timings() const noexcept { return timings_; }

  /// Pass when deviation <= tolerance (NaN fails).
  const Check& expect_le(const std::string& name, double deviation, double tolerance, std::string note = {}) {
    const bool ok = deviation <= tolerance;
    return push({name, ok ? CheckStatus::Pass : CheckStatus::Fail, deviation, tolerance, std::move(note)});
  }
  const Check& expect_true(const std::string& name, bool ok, std::string note = {}) {
    return push({name, ok ? CheckStatus::Pass : CheckStatus::Fail, ok ? 0.0 : 1.0, 0.0, std::move(note)});
  }
  const Check& info(const std::string& name, double value, std::string note = {}) {
    return push({name, CheckStatus::Info, value, 0.0, std::move(note)});
  }
  const Check& add(Check check) { return push(std::move(check)); }

  void add_timing(std::string label, double seconds) { timings_.emplace_back(std::move(label), seconds); }

  bool ok() const {
    for (const auto& c : checks_) {
      if (c.status == CheckStatus::Fail) return false;
    }
    return true;
  }

  /// Timings are wall-clock and omitted unless asked for, so that reports stay
  /// byte-stable across runs.
  nlohmann::ordered_json to_json(bool with_timings = false) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["ok"] = ok();
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : checks_) {
      nlohmann::ordered_json e;
      e["name"] = c.name;
      e["status"] = status_name(c.status);
      e["deviation"] = std::isfinite(c.deviation) ? nlohmann::ordered_json(c.deviation) : nlohmann::ordered_json("nan");
      e["tolerance"] = c.tolerance;
      if (!c.note.empty()) e["note"] = c.note;
      arr.push_back(std::move(e));
    }
    j["checks"] = std::move(arr);
    if (with_timings) {
      nlohmann::ordered_json t = nlohmann::ordered_json::object();
      for (const auto& [label, s] : timings_) t[label] = s;
      j["timings"] = std::move(t);
    }
    return j;
  }

 private:
  const Check& push(Check check) {
    for (const auto& c : checks_) {
      if (c.name == check.name) throw Error(ErrorKind::InvalidArgument, "duplicate check " + check.name);
    }
    checks_.push_back(std::move(check));
    return checks_.back();
  }

  std::string command_;
  std::vector<Check> checks_;
  std::vector<std::pair<std::string, double>> timings_;
};

}  // namespace gfock::cli
