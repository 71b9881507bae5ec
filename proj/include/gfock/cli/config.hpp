#pragma once

// JSON scenario configuration. Every semantic error is a ConfigError naming
// the source file and the JSON pointer of the offending value.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfock/cli/export.hpp"
#include "gfock/contextual.hpp"
#include "gfock/error.hpp"
#include "gfock/fock_core.hpp"
#include "gfock/kinetics.hpp"
#include "gfock/window.hpp"

namespace gfock::cli {

using json = nlohmann::json;

struct ScenarioConfig {
  std::string source = "<inline>";
  std::optional<json> spec;
  std::optional<json> op;
  std::optional<json> kinetics;
  std::optional<json> contexts;
  json verify = json::object();
  std::filesystem::path out_dir = ".";
  Format format = Format::Csv;
  double tol = kDefaultTol;
  std::optional<std::uint64_t> seed;
  bool include_timings = false;
};

/// Typed access to a JSON node with its pointer path for error messages.
class Node {
 public:
  Node(const json& value, std::string path, const std::string& source)
      : value_(&value), path_(std::move(path)), source_(&source) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::ConfigError, *source_ + ": " + (path_.empty() ? "/" : path_) + ": " + msg);
  }

  const json& raw() const { return *value_; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return value_->is_object() && value_->contains(key); }

  Node operator[](const std::string& key) const {
    if (!value_->is_object()) fail("expected an object");
    const auto it = value_->find(key);
    if (it == value_->end()) fail("missing key \"" + key + "\"");
    return {*it, path_ + "/" + key, *source_};
  }
  Node operator[](std::size_t i) const {
    if (!value_->is_array() || i >= value_->size()) fail("expected an array with index " + std::to_string(i));
    return {(*value_)[i], path_ + "/" + std::to_string(i), *source_};
  }
  std::size_t size() const {
    if (!value_->is_array()) fail("expected an array");
    return value_->size();
  }
  bool is_array() const { return value_->is_array(); }
  bool is_object() const { return value_->is_object(); }
  bool is_number() const { return value_->is_number(); }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    return value_->get<double>();
  }
  long integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    return value_->get<long>();
  }
  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }
  /// A number, or [re, im].
  Complex complex() const {
    if (value_->is_number()) return value_->get<double>();
    if (value_->is_array() && value_->size() == 2 && (*value_)[0].is_number() && (*value_)[1].is_number()) {
      return {(*value_)[0].get<double>(), (*value_)[1].get<double>()};
    }
    fail("expected a number or [re, im]");
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].number());
    return out;
  }
  std::vector<Complex> complexes() const {
    std::vector<Complex> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].complex());
    return out;
  }
  RealVector real_vector() const {
    const auto v = numbers();
    return Eigen::Map<const RealVector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  Vector complex_vector() const {
    const auto v = complexes();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  Window window() const {
    if (!value_->is_array() || value_->size() != 2) fail("expected [n_min, n_max]");
    const long lo = (*this)[0].integer();
    const long hi = (*this)[1].integer();
    if (lo > hi) fail("window has n_min > n_max");
    return {lo, hi};
  }

 private:
  const json* value_;
  std::string path_;
  const std::string* source_;
};

inline ScenarioConfig parse_config(const json& doc, std::string source = "<inline>") {
  ScenarioConfig cfg;
  cfg.source = std::move(source);
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, cfg.source + ": top level must be an object");
  static const char* const kKnown[] = {"spec", "operator", "kinetics", "contexts", "output",
                                       "verify", "tolerance", "seed"};
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw Error(ErrorKind::ConfigError, cfg.source + ": /" + key + ": unknown section");
  }
  const Node root(doc, "", cfg.source);
  if (doc.contains("spec")) cfg.spec = doc["spec"];
  if (doc.contains("operator")) cfg.op = doc["operator"];
  if (doc.contains("kinetics")) cfg.kinetics = doc["kinetics"];
  if (doc.contains("contexts")) cfg.contexts = doc["contexts"];
  if (doc.contains("verify")) {
    if (!doc["verify"].is_object()) root["verify"].fail("expected an object");
    cfg.verify = doc["verify"];
  }
  if (doc.contains("tolerance")) {
    cfg.tol = root["tolerance"].number();
    if (!(cfg.tol > 0.0)) root["tolerance"].fail("tolerance must be positive");
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) root["seed"].fail("expected a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    const Node out = root["output"];
    if (out.has("dir")) cfg.out_dir = out["dir"].string();
    if (out.has("format")) {
      const auto f = out["format"].string();
      if (f == "csv") {
        cfg.format = Format::Csv;
      } else if (f == "json") {
        cfg.format = Format::Json;
      } else {
        out["format"].fail("format must be csv or json");
      }
    }
    if (out.has("timings")) {
      if (!out["timings"].raw().is_boolean()) out["timings"].fail("expected a boolean");
      cfg.include_timings = out["timings"].raw().get<bool>();
    }
  }

  // Windows named in several sections must agree.
  std::optional<Window> win;
  if (cfg.spec && cfg.spec->contains("window")) win = Node(*cfg.spec, "/spec", cfg.source)["window"].window();
  if (cfg.kinetics && cfg.kinetics->contains("window")) {
    const Node kw = Node(*cfg.kinetics, "/kinetics", cfg.source)["window"];
    const Window w = kw.window();
    if (win && !(*win == w)) kw.fail("window " + w.str() + " differs from spec window " + win->str());
  }
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.string());
}

// --- section decoders --------------------------------------------------------

/// number or {"const": z} -> constant; array -> table starting at `first`;
/// {"first", "values"} -> table.
inline LadderFn parse_ladder_fn(const Node& node, long first, const std::string& name) {
  if (node.is_number()) return constant_fn(node.complex());
  if (node.has("const")) return constant_fn(node["const"].complex());
  if (node.is_array()) return table_fn(first, node.complexes(), name);
  if (node.is_object()) return table_fn(node["first"].integer(), node["values"].complexes(), name);
  node.fail("expected a number, an array, {\"const\"} or {\"first\", \"values\"}");
}

inline ResolvedSpec parse_spec(const ScenarioConfig& cfg) {
  if (!cfg.spec) throw Error(ErrorKind::ConfigError, cfg.source + ": missing /spec section");
  const Node spec(*cfg.spec, "/spec", cfg.source);
  const Window w = spec["window"].window();
  if (spec.has("preset")) {
    const auto name = spec["preset"].string();
    if (name == "doi_peliti") return doi_peliti(w);
    if (name == "bosonic") return bosonic(w);
    spec["preset"].fail("unknown preset \"" + name + "\" (doi_peliti, bosonic)");
  }
  const long first = w.n_min() - 1;
  try {
    if (spec.has("K")) {
      const Complex F0 = spec.has("F0") ? spec["F0"].complex() : Complex(1.0);
      return resolve_ladder_functions(
          {CommutatorLadder{parse_ladder_fn(spec["K"], first, "K"), F0, parse_ladder_fn(spec["f"], first, "f")}}, w);
    }
    if (spec.has("f") && spec.has("phi")) {
      return resolve_ladder_functions(
          {DirectLadder{parse_ladder_fn(spec["f"], first, "f"), parse_ladder_fn(spec["phi"], first, "phi")}}, w);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::OutOfTable) spec.fail(e.what());
    throw;
  }
  spec.fail("needs \"preset\", {\"f\", \"phi\"} or {\"K\", \"F0\", \"f\"}");
}

inline Family parse_family(const Node& node) {
  const auto s = node.string();
  if (s == "quantum") return Family::Quantum;
  if (s == "doi_peliti") return Family::DoiPeliti;
  if (s == "power_r") return Family::PowerR;
  if (s == "general_phi") return Family::GeneralPhi;
  node.fail("unknown family \"" + s + "\"");
}

}  // namespace gfock::cli
