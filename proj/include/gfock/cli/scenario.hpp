#pragma once

// Scenario runner behind the `gfock` command line tool. Each subcommand reads
// its sections of a ScenarioConfig, runs the computation, records checks in a
// RunReport and writes its outputs into the configured directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gfock/cli/config.hpp"
#include "gfock/cli/export.hpp"
#include "gfock/cli/report.hpp"
#include "gfock/contextual.hpp"
#include "gfock/error.hpp"
#include "gfock/fock_core.hpp"
#include "gfock/kinetics.hpp"
#include "gfock/operator_builder.hpp"

namespace gfock::cli {

using ojson = nlohmann::ordered_json;

/// Equivalence bound between the direct and Fock-space integrations.
inline constexpr double kEquivalenceTol = 1e-8;
/// Allowed terminal probability loss through the window boundary.
inline constexpr double kLeakageBudget = 1e-6;
inline constexpr double kNonnegativityTol = 1e-9;
/// SSA comparisons with fewer runs are informational only.
inline constexpr std::size_t kMinSsaRuns = 1000;
inline constexpr double kSsaSigmas = 3.0;
inline constexpr double kMaxEscapeFraction = 1e-3;

enum class Command { Ladder, Operator, Evolve, Context, Verify };

inline std::string command_name(Command c) {
  switch (c) {
    case Command::Ladder: return "ladder";
    case Command::Operator: return "operator";
    case Command::Evolve: return "evolve";
    case Command::Context: return "context";
    case Command::Verify: return "verify";
  }
  return "unknown";
}

inline void print_report(std::ostream& os, const RunReport& report) {
  for (const auto& c : report.checks()) {
    os << (c.status == CheckStatus::Pass   ? "PASS "
           : c.status == CheckStatus::Fail ? "FAIL "
                                           : "INFO ")
       << c.name << "  deviation=" << format_double(c.deviation) << "  tol=" << format_double(c.tolerance);
    if (c.status == CheckStatus::InsufficientStatistics) os << "  [insufficient statistics]";
    if (!c.note.empty()) os << "  (" << c.note << ")";
    os << '\n';
  }
  os << (report.ok() ? "OK" : "FAILED") << '\n';
}

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline ojson complex_array(const Vector& v) {
  ojson re = ojson::array(), im = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    re.push_back(v(i).real());
    im.push_back(v(i).imag());
  }
  return {{"re", re}, {"im", im}};
}

inline ojson real_array(const RealVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline ojson matrix_json(const OperatorMatrix& op) {
  ojson re = ojson::array(), im = ojson::array();
  for (Eigen::Index i = 0; i < op.m.rows(); ++i) {
    std::vector<double> r, c;
    for (Eigen::Index j = 0; j < op.m.cols(); ++j) {
      r.push_back(op.m(i, j).real());
      c.push_back(op.m(i, j).imag());
    }
    re.push_back(r);
    im.push_back(c);
  }
  return {{"window", {op.window.n_min(), op.window.n_max()}}, {"re", re}, {"im", im}};
}

inline ojson table_json(const GuardedTable& t, const Window& w) {
  Vector v(w.dim());
  for (long n = w.n_min(); n <= w.n_max(); ++n) v(w.index(n)) = t(n);
  return complex_array(v);
}

// Rethrows module errors raised while decoding a config value as ConfigError at `node`.
template <class Fn>
auto at_node(const Node& node, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::IoError) throw;
    node.fail(e.what());
  }
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::IoError, "cannot create output directory " + dir.string());
  }
}

inline Window kinetics_window(const ScenarioConfig& cfg) {
  const Node kin(*cfg.kinetics, "/kinetics", cfg.source);
  if (kin.has("window")) return kin["window"].window();
  if (cfg.spec && cfg.spec->contains("window")) return Node(*cfg.spec, "/spec", cfg.source)["window"].window();
  kin.fail("no window: set /kinetics/window or /spec/window");
}

inline RateModel parse_rates(const Node& kin, const Window& w) {
  if (kin.has("rates")) {
    const Node rates = kin["rates"];
    RateModel m(w);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const Node e = rates[i];
      if (e.size() != 3) e.fail("expected [target, source, rate]");
      const long target = e[0].integer();
      const long source = e[1].integer();
      const double rate = e[2].number();
      if (!w.contains(target)) e.fail("rate target " + std::to_string(target) + " outside window " + w.str());
      at_node(e, [&] {
        m.set_rate(target, source, rate);
        return 0;
      });
    }
    return m;
  }
  if (kin.has("birth_coagulation")) {
    const Node bc = kin["birth_coagulation"];
    return birth_coagulation_rates(bc["alpha"].number(), bc["beta"].number(), w);
  }
  if (kin.has("pure_birth")) return pure_birth_rates(kin["pure_birth"]["alpha"].number(), w);
  kin.fail("needs \"rates\", \"birth_coagulation\" or \"pure_birth\"");
}

struct KineticsRun {
  Trajectory direct;
  Trajectory fock;
};

// Shared by `evolve` and `verify`.
inline KineticsRun check_kinetics(RunReport& report, const std::string& prefix, const RateModel& model,
                                  const DistributionState& p0, double T, std::size_t steps, std::size_t record_every,
                                  double tol) {
  const Window& w = model.window();
  const TransitionTable table = w_from_rates(model);
  double row_dev = 0.0;
  for (long n = w.n_min(); n <= w.n_max(); ++n) row_dev = std::max(row_dev, std::abs(generator_row_sum(table, n)));
  report.expect_le(prefix + ".row_sums", row_dev, 0.0, "exact");

  const OperatorMatrix W = op_from_transitions(table);
  double col_dev = 0.0;
  for (long n = w.n_min(); n <= w.n_max(); ++n) {
    col_dev = std::max(col_dev, std::abs(W.m.col(w.index(n)).sum() + table.outflow(n)));
  }
  report.expect_le(prefix + ".column_sums", col_dev, tol * std::max(1.0, W.m.cwiseAbs().maxCoeff()));

  if (steps == 0) steps = default_steps(table, T);
  KineticsRun run;
  run.direct = evolve_direct(model, p0, T, steps, {record_every});
  run.fock = evolve_fock(W, p0.p.cast<Complex>(), T, steps, {record_every});

  double gap = 0.0, conservation = 0.0, min_p = 0.0;
  for (std::size_t i = 0; i < run.direct.states.size(); ++i) {
    gap = std::max(gap, (run.direct.states[i].p - run.fock.states[i].p).cwiseAbs().maxCoeff());
    for (const Trajectory* t : {&run.direct, &run.fock}) {
      conservation = std::max(conservation, std::abs(t->leakage[i] - t->escaped[i]));
      min_p = std::min(min_p, t->states[i].p.minCoeff());
    }
  }
  report.expect_le(prefix + ".fock_equivalence", gap, kEquivalenceTol, "sup-norm over samples");
  report.expect_le(prefix + ".conservation", conservation, kIntegratorTol, "|1 - sum p - escaped flux|");
  report.expect_le(prefix + ".terminal_leakage", std::abs(run.direct.leakage.back()), kLeakageBudget);
  report.expect_le(prefix + ".nonnegativity", -min_p, kNonnegativityTol);
  report.expect_le(prefix + ".fock_imaginary", run.fock.max_imag, tol);
  return run;
}

inline void check_ssa(RunReport& report, const std::string& prefix, const RateModel& model, long n0, double T,
                      std::size_t runs, std::uint64_t seed, unsigned threads) {
  const SsaResult ssa = ssa_oracle(model, n0, T, runs, seed, {threads});
  const Window& w = model.window();
  const auto steps = default_steps(w_from_rates(model), T);
  const Trajectory me = evolve_direct(model, delta_state(w, n0), T, steps, {steps});
  const RealVector& p = me.states.back().p;
  const double mean = distribution_moment(w, p, 1);
  const double second = distribution_moment(w, p, 2);

  const auto add = [&](const std::string& name, double emp, double exact, double se) {
    Check c{prefix + name, CheckStatus::Pass, std::abs(emp - exact), kSsaSigmas * se,
            "empirical " + format_double(emp) + " vs master equation " + format_double(exact)};
    if (runs < kMinSsaRuns) {
      c.status = CheckStatus::InsufficientStatistics;
    } else if (!(c.deviation <= c.tolerance)) {
      c.status = CheckStatus::Fail;
    }
    report.add(std::move(c));
  };
  add(".ssa_mean", ssa.mean, mean, ssa.mean_se);
  add(".ssa_second_moment", ssa.second_moment, second, ssa.second_moment_se);
  report.expect_le(prefix + ".ssa_escape_fraction", ssa.escape_fraction(), kMaxEscapeFraction);
}

inline DistributionState parse_p0(const Node& kin, const Window& w, long* n0) {
  if (kin.has("n0")) {
    *n0 = kin["n0"].integer();
    if (!w.contains(*n0)) kin["n0"].fail("n0 outside window " + w.str());
    return delta_state(w, *n0);
  }
  const Node p0 = kin["p0"];
  const RealVector p = p0.real_vector();
  if (p.size() != w.dim()) p0.fail("p0 has " + std::to_string(p.size()) + " entries, window " + w.str() + " needs " +
                                   std::to_string(w.dim()));
  *n0 = w.n_min() - 1;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) == 1.0) *n0 = w.label(i);
  }
  return {p, 0.0};
}

}  // namespace detail

inline RunReport run_ladder(const ScenarioConfig& cfg) {
  RunReport report("ladder");
  const ResolvedSpec spec = detail::at_node(Node(*cfg.spec, "/spec", cfg.source), [&] { return parse_spec(cfg); });
  const LadderOps ops = build_ladder(spec);
  const Window& w = spec.window;
  report.expect_le("ladder.recurrence", recurrence_residual(spec), cfg.tol);
  report.expect_le("ladder.phi_consistency", phi_residual(spec), cfg.tol);
  report.expect_le("ladder.commutator", commutator_deviation(ops), cfg.tol);
  report.expect_le("ladder.number_operator", number_operator_deviation(ops), cfg.tol);
  const bool adjoint = adjointness_holds(spec, cfg.tol);
  report.info("ladder.adjoint", adjoint ? 1.0 : 0.0, adjoint ? "a^dag is the adjoint of a" : "a^dag is not the adjoint of a");
  if (w.contains(0)) {
    double worst = 0.0;
    std::size_t skipped = 0;
    for (long n = w.n_min(); n <= w.n_max(); ++n) {
      try {
        worst = std::max(worst, (basis_vector_via_ladder(n, ops) - unit_vector(w, n)).cwiseAbs().maxCoeff());
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ZeroDivisor) throw;
        ++skipped;
      }
    }
    report.expect_le("ladder.basis_vectors", worst, cfg.tol,
                     skipped ? std::to_string(skipped) + " labels unreachable from |0>" : std::string{});
  }

  ojson out;
  out["window"] = {w.n_min(), w.n_max()};
  out["f"] = detail::table_json(spec.f, w);
  out["phi"] = detail::table_json(spec.phi, w);
  out["F"] = detail::table_json(spec.F, w);
  out["K"] = detail::table_json(spec.K, w);
  out["adjoint"] = adjoint;
  detail::ensure_dir(cfg.out_dir);
  export_json(out, cfg.out_dir / "ladder.json");
  return report;
}

inline RunReport run_operator(const ScenarioConfig& cfg) {
  RunReport report("operator");
  if (!cfg.op) throw Error(ErrorKind::ConfigError, cfg.source + ": missing /operator section");
  const Node sec(*cfg.op, "/operator", cfg.source);
  if (!cfg.spec) throw Error(ErrorKind::ConfigError, cfg.source + ": missing /spec section");
  const ResolvedSpec spec = detail::at_node(Node(*cfg.spec, "/spec", cfg.source), [&] { return parse_spec(cfg); });
  const LadderOps ops = build_ladder(spec);
  const Window& w = spec.window;
  OperatorMatrix primary;

  if (sec.has("birth_coagulation")) {
    const Node bc = sec["birth_coagulation"];
    const double alpha = bc["alpha"].number();
    const double beta = bc["beta"].number();
    primary = birth_coagulation(alpha, beta, BirthCoagulationForm::Transitions, ops);
    const long lo = w.n_min() + 2;
    const long hi = w.n_max() - 3;
    const double scale = std::max(1.0, primary.m.cwiseAbs().maxCoeff());
    if (lo <= hi) {
      const auto ladder = detail::at_node(bc, [&] {
        return op_from_ladder_expansion(birth_coagulation_table(alpha, beta, w), ops);
      });
      report.expect_le("operator.ladder_expansion", column_deviation(primary, ladder, lo, hi), cfg.tol * scale);
      if (matches_doi_peliti(spec)) {
        const auto composed = birth_coagulation(alpha, beta, BirthCoagulationForm::LadderComposition, ops);
        const auto normal = birth_coagulation(alpha, beta, BirthCoagulationForm::NormalForm, ops);
        report.expect_le("operator.composition", column_deviation(primary, composed, lo, hi), cfg.tol * scale);
        report.expect_le("operator.normal_form", column_deviation(primary, normal, lo, hi), cfg.tol * scale);
      } else {
        report.info("operator.normal_form", 0.0, "skipped: ladder compositions need the doi_peliti spec");
      }
    }
  } else if (sec.has("transitions")) {
    const Node entries = sec["transitions"];
    TransitionTable table(w);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Node e = entries[i];
      if (e.size() != 3) e.fail("expected [n, k, w]");
      const long n = e[0].integer();
      const long k = e[1].integer();
      const Complex value = e[2].complex();
      detail::at_node(e, [&] {
        table.set(n, k, value);
        return 0;
      });
    }
    primary = op_from_transitions(table);
    const long band = table.band();
    const auto ladder = detail::at_node(entries, [&] { return op_from_ladder_expansion(table, ops); });
    const double scale = std::max(1.0, primary.m.cwiseAbs().maxCoeff());
    if (w.n_min() + band <= w.n_max() - band) {
      report.expect_le("operator.ladder_expansion",
                       column_deviation(primary, ladder, w.n_min() + band, w.n_max() - band), cfg.tol * scale);
    }
  } else if (sec.has("eigenvalues")) {
    const Node ev = sec["eigenvalues"];
    const Vector values = ev.complex_vector();
    if (values.size() != w.dim()) ev.fail("needs one eigenvalue per window label");
    primary = op_from_eigenvalues([&](long n) { return values(w.index(n)); }, w);
    if (sec.has("derivatives")) {
      const auto series = number_series_op(sec["derivatives"].complexes(), ops);
      const double series_tol = sec.has("series_tol") ? sec["series_tol"].number() : 1e-10;
      report.expect_le("operator.number_series", (series.m - primary.m).cwiseAbs().maxCoeff(), series_tol);
    }
  } else {
    sec.fail("needs \"birth_coagulation\", \"transitions\" or \"eigenvalues\"");
  }

  detail::ensure_dir(cfg.out_dir);
  export_json(detail::matrix_json(primary), cfg.out_dir / "operator.json");
  return report;
}

inline RunReport run_evolve(const ScenarioConfig& cfg) {
  RunReport report("evolve");
  if (!cfg.kinetics) throw Error(ErrorKind::ConfigError, cfg.source + ": missing /kinetics section");
  const Node kin(*cfg.kinetics, "/kinetics", cfg.source);
  const Window w = detail::kinetics_window(cfg);
  const RateModel model = detail::parse_rates(kin, w);
  long n0 = 0;
  const DistributionState p0 = detail::parse_p0(kin, w, &n0);
  const double T = kin["T"].number();
  if (!(T >= 0.0)) kin["T"].fail("T must be nonnegative");
  const std::size_t steps = kin.has("steps") ? static_cast<std::size_t>(kin["steps"].integer()) : 0;
  const std::size_t every = kin.has("record_every") ? static_cast<std::size_t>(kin["record_every"].integer()) : 1;

  detail::Stopwatch sw;
  const auto run = detail::at_node(kin, [&] {
    return detail::check_kinetics(report, "kinetics", model, p0, T, steps, every, cfg.tol);
  });
  report.add_timing("integrate", sw.seconds());

  if (kin.has("ssa")) {
    const Node ssa = kin["ssa"];
    if (!w.contains(n0)) kin.fail("SSA needs a point initial state (n0 or a delta p0)");
    const auto runs = static_cast<std::size_t>(ssa["runs"].integer());
    const std::uint64_t seed = cfg.seed ? *cfg.seed : (ssa.has("seed") ? static_cast<std::uint64_t>(ssa["seed"].integer()) : 42);
    const double ssa_T = ssa.has("T") ? ssa["T"].number() : T;
    const unsigned threads = ssa.has("threads") ? static_cast<unsigned>(ssa["threads"].integer()) : 1;
    detail::Stopwatch ssw;
    detail::check_ssa(report, "kinetics", model, n0, ssa_T, runs, seed, threads);
    report.add_timing("ssa", ssw.seconds());
  }

  detail::ensure_dir(cfg.out_dir);
  export_trajectory(run.direct, cfg.format, cfg.out_dir / (cfg.format == Format::Csv ? "trajectory.csv" : "trajectory.json"));
  return report;
}

inline RunReport run_context(const ScenarioConfig& cfg) {
  RunReport report("context");
  if (!cfg.contexts) throw Error(ErrorKind::ConfigError, cfg.source + ": missing /contexts section");
  const Node sec(*cfg.contexts, "/contexts", cfg.source);
  const double p1 = sec["p1"].number();
  const double p2 = sec.has("p2") ? sec["p2"].number() : 1.0 - p1;
  const Node dists = sec["distributions"];
  if (dists.size() != 2) dists.fail("expected two distributions");
  const RealVector prob1 = dists[0].real_vector();
  const RealVector prob2 = dists[1].real_vector();
  if (prob1.size() != prob2.size()) dists.fail("distributions differ in length");
  if (cfg.spec && cfg.spec->contains("window")) {
    const Window w = Node(*cfg.spec, "/spec", cfg.source)["window"].window();
    if (prob1.size() != w.dim()) dists.fail("distribution length does not match spec window " + w.str());
  }
  const RealVector classical = p1 * prob1 + p2 * prob2;

  ojson out;
  ojson P = ojson(), R = ojson(), sum_R = ojson();

  std::optional<ContextVector> ctx1, ctx2;
  if (sec.has("encoding")) {
    const Node enc = sec["encoding"];
    EncodingParams params[2];
    for (int i = 0; i < 2; ++i) {
      params[i].family = parse_family(enc["family"]);
      if (enc.has("r")) params[i].r = enc["r"].number();
      if (enc.has("beta")) params[i].beta = enc["beta"][static_cast<std::size_t>(i)].real_vector();
      if (enc.has("phi")) params[i].phi = enc["phi"][static_cast<std::size_t>(i)].complex_vector();
    }
    ctx1 = detail::at_node(enc, [&] { return encode(prob1, params[0]); });
    ctx2 = detail::at_node(enc, [&] { return encode(prob2, params[1]); });
    for (int i = 0; i < 2; ++i) {
      const ContextVector& ctx = i == 0 ? *ctx1 : *ctx2;
      const RealVector& prob = i == 0 ? prob1 : prob2;
      double dev = 0.0;
      try {
        dev = (decode(ctx, cfg.tol) - prob).cwiseAbs().maxCoeff();
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NotAProbability) throw;
        dev = std::numeric_limits<double>::infinity();
      }
      report.expect_le("context.roundtrip_" + std::to_string(i + 1), dev, cfg.tol);
    }
  }

  if (sec.has("mixture")) {
    const Node mixn = sec["mixture"];
    if (!ctx1) mixn.fail("a mixture needs /contexts/encoding");
    const auto mode = mixn["mode"].string();
    MixtureParams mix;
    if (mode == "doi_peliti_convex") {
      mix = MixtureParams::convex(p1, p2);
    } else if (mode == "general") {
      const auto g = mixn["g"].complexes();
      const auto q = mixn["q"].complexes();
      if (g.size() != 2 || q.size() != 2) mixn.fail("g and q need two entries each");
      mix = MixtureParams::general(p1, p2, g[0], g[1], q[0], q[1]);
    } else {
      mixn["mode"].fail("mode must be general or doi_peliti_convex");
    }
    const ContextVector combined = detail::at_node(mixn, [&] { return combine(*ctx1, *ctx2, mix); });
    const TotalProbability tp = total_probability(combined, *ctx1, *ctx2, mix);
    report.expect_le("context.decomposition_identity", tp.identity_residual, cfg.tol);
    report.expect_le("context.normalization_equivalence",
                     std::abs(tp.normalization_deviation - std::abs(tp.sum_R)), cfg.tol);
    report.info("context.sum_R", std::abs(tp.sum_R), "nonzero means the combination is not normalized");
    out["mixture"] = {{"P", detail::complex_array(tp.P)},
                      {"R", detail::complex_array(tp.R)},
                      {"sum_R", {tp.sum_R.real(), tp.sum_R.imag()}}};
    P = detail::real_array(tp.P.real());
    R = detail::real_array(tp.R.real());
    sum_R = tp.sum_R.real();
  }

  if (sec.has("closed_form")) {
    const Node cf = sec["closed_form"];
    const auto mode = cf["mode"].string();
    ClosedFormResult res;
    if (mode == "quantum") {
      res = detail::at_node(cf, [&] {
        return closed_form_interference(p1, p2, prob1, prob2, QuantumInterference{cf["phases"].real_vector()});
      });
    } else if (mode == "linear") {
      LinearInterference lin{cf["mu_gamma"].real_vector(), {}};
      const Node signs = cf["signs"];
      for (std::size_t i = 0; i < signs.size(); ++i) {
        const auto s = signs[i].string();
        if (s != "+" && s != "-") signs[i].fail("sign must be \"+\" or \"-\"");
        lin.signs.push_back(s == "+" ? Sign::Plus : Sign::Minus);
      }
      res = detail::at_node(cf, [&] { return closed_form_interference(p1, p2, prob1, prob2, lin); });
    } else {
      cf["mode"].fail("mode must be quantum or linear");
    }
    report.info("context.closed_form_sum_deviation", std::abs(res.sum - 1.0));
    const RealVector interference = res.P - classical;
    out["closed_form"] = {{"P", detail::real_array(res.P)}, {"sum", res.sum}};
    P = detail::real_array(res.P);
    R = detail::real_array(interference);
    sum_R = interference.sum();
  }

  if (sec.has("interference")) {
    const Node in = sec["interference"];
    InterferenceParams params{in["mu"].number(), in["Gamma"].real_vector(), in["gamma"].real_vector(),
                              in.has("delta") ? in["delta"].number() : 0.0};
    const auto branches = detail::at_node(in, [&] { return realness_branch(params, p1, p2, prob1, prob2, cfg.tol); });
    ojson labels = ojson::array();
    for (const Branch b : branches) labels.push_back(branch_name(b));
    out["branches"] = labels;
    const Vector general = detail::at_node(in, [&] { return interference_general(params, p1, p2, prob1, prob2); });
    out["general"] = detail::complex_array(general);
  }

  if (P.is_null()) sec.fail("needs at least one of \"mixture\" or \"closed_form\"");
  ojson result;
  result["P"] = P;
  result["R"] = R;
  result["sum_R"] = sum_R;
  if (out.contains("branches")) result["branches"] = out["branches"];
  result["classical"] = detail::real_array(classical);
  for (auto& [key, value] : out.items()) {
    if (key != "branches") result[key] = value;
  }
  detail::ensure_dir(cfg.out_dir);
  export_json(result, cfg.out_dir / "context.json");
  return report;
}

/// Runs one subcommand (not verify).
inline RunReport run_scenario(const ScenarioConfig& cfg, Command cmd) {
  if (cmd != Command::Ladder && !cfg.op && !cfg.kinetics && !cfg.contexts) {
    throw Error(ErrorKind::ConfigError, cfg.source + ": needs at least one of operator, kinetics, contexts");
  }
  switch (cmd) {
    case Command::Ladder:
      if (!cfg.spec) throw Error(ErrorKind::ConfigError, cfg.source + ": missing /spec section");
      return run_ladder(cfg);
    case Command::Operator: return run_operator(cfg);
    case Command::Evolve: return run_evolve(cfg);
    case Command::Context: return run_context(cfg);
    case Command::Verify: break;
  }
  throw Error(ErrorKind::InvalidArgument, "verify is run through verify_suite");
}

// --- verify ------------------------------------------------------------------

struct VerifyOptions {
  Window ladder_window{0, 100};
  Window random_f_window{-5, 5};
  Window bc_operator_window{0, 30};
  double bc_alpha = 1.0;
  double bc_beta_operator = 0.5;
  Window expansion_window{0, 20};
  long expansion_band = 3;
  Window kinetics_window{0, 80};
  double bc_beta_kinetics = 0.1;
  double kinetics_T = 5.0;
  std::size_t record_every = 1000;
  double ssa_T = 2.0;
  std::size_t ssa_runs = 100000;
  Window yule_window{0, 60};
  double yule_alpha = 0.5;
  double yule_T = 2.0;
  std::size_t instances = 100;
  std::size_t outcomes = 6;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: hardware concurrency
};

inline VerifyOptions parse_verify_options(const ScenarioConfig& cfg) {
  VerifyOptions o;
  const Node v(cfg.verify, "/verify", cfg.source);
  const auto win = [&](const char* key, Window& target) {
    if (v.has(key)) target = v[key].window();
  };
  const auto num = [&](const char* key, double& target) {
    if (v.has(key)) target = v[key].number();
  };
  const auto count = [&](const char* key, std::size_t& target) {
    if (v.has(key)) {
      const long x = v[key].integer();
      if (x < 0) v[key].fail("expected a nonnegative count");
      target = static_cast<std::size_t>(x);
    }
  };
  win("ladder_window", o.ladder_window);
  win("random_f_window", o.random_f_window);
  win("bc_operator_window", o.bc_operator_window);
  win("expansion_window", o.expansion_window);
  win("kinetics_window", o.kinetics_window);
  win("yule_window", o.yule_window);
  num("bc_alpha", o.bc_alpha);
  num("bc_beta_operator", o.bc_beta_operator);
  num("bc_beta_kinetics", o.bc_beta_kinetics);
  num("kinetics_T", o.kinetics_T);
  num("ssa_T", o.ssa_T);
  num("yule_alpha", o.yule_alpha);
  num("yule_T", o.yule_T);
  count("record_every", o.record_every);
  count("ssa_runs", o.ssa_runs);
  count("instances", o.instances);
  count("outcomes", o.outcomes);
  if (v.has("expansion_band")) o.expansion_band = v["expansion_band"].integer();
  if (v.has("threads")) o.threads = static_cast<unsigned>(v["threads"].integer());
  if (v.has("seed")) o.seed = static_cast<std::uint64_t>(v["seed"].integer());
  if (cfg.seed) o.seed = *cfg.seed;
  if (o.threads == 0) o.threads = std::max(1u, std::thread::hardware_concurrency());
  if (o.instances == 0 || o.outcomes == 0) v.fail("instances and outcomes must be positive");
  return o;
}

namespace detail {

inline RealVector random_distribution(RunRng& rng, std::size_t size) {
  RealVector p(static_cast<Eigen::Index>(size));
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = 0.05 + rng.uniform();
  return p / p.sum();
}

}  // namespace detail

/// Runs the invariants of every module at the configured sizes.
inline RunReport verify_suite(const ScenarioConfig& cfg) {
  const VerifyOptions o = parse_verify_options(cfg);
  const double tol = cfg.tol;
  RunReport report("verify");
  detail::Stopwatch total;
  std::uint64_t stream = 0;
  const auto next_rng = [&] { return RunRng(o.seed, 0x5EED0000ULL + stream++); };

  // ladder
  {
    detail::Stopwatch sw;
    const auto dp = build_ladder(doi_peliti(o.ladder_window));
    const auto bo = build_ladder(bosonic(o.ladder_window));
    report.expect_le("ladder.commutator.doi_peliti", commutator_deviation(dp), tol);
    report.expect_le("ladder.commutator.bosonic", commutator_deviation(bo), tol);
    report.expect_le("ladder.recurrence", std::max(recurrence_residual(dp.spec), recurrence_residual(bo.spec)), tol);
    double number_dev = 0.0;
    {
      const auto [lo, hi] = interior_range(dp.spec);
      for (const LadderOps* ops : {&dp, &bo}) {
        for (long n = lo; n <= hi; ++n) {
          const auto i = ops->window().index(n);
          number_dev = std::max(number_dev, std::abs(ops->N(i, i) - static_cast<double>(n)));
        }
        number_dev = std::max(number_dev, number_operator_deviation(*ops));
      }
    }
    report.expect_le("ladder.number_operator", number_dev, tol);
    report.expect_true("ladder.adjoint.bosonic", adjointness_holds(bo.spec, tol));
    report.expect_true("ladder.adjoint.doi_peliti_not_adjoint", !adjointness_holds(dp.spec, tol));
    report.expect_le("ladder.vacuum", std::max(dp.a.col(0).cwiseAbs().maxCoeff(), bo.a.col(0).cwiseAbs().maxCoeff()),
                     0.0, "a e_{n_min} = 0");

    double basis_dev = 0.0;
    for (const LadderOps* ops : {&dp, &bo}) {
      for (long n = ops->window().n_min(); n <= ops->window().n_max(); ++n) {
        if (!ops->window().contains(0)) break;
        basis_dev = std::max(basis_dev,
                             (basis_vector_via_ladder(n, *ops) - unit_vector(ops->window(), n)).cwiseAbs().maxCoeff());
      }
    }
    report.expect_le("ladder.basis_vectors", basis_dev, tol);

    auto rng = next_rng();
    std::map<long, Complex> f_table;
    for (long n = o.random_f_window.n_min() - 1; n <= o.random_f_window.n_max() + 1; ++n) {
      f_table[n] = 0.5 + 1.5 * rng.uniform();
    }
    const auto rnd = build_ladder(
        resolve_ladder_functions({CommutatorLadder{constant_fn(1.0), 1.0, table_fn(f_table, "f")}}, o.random_f_window));
    report.expect_le("ladder.commutator.random_f", commutator_deviation(rnd), tol);
    report.add_timing("ladder", sw.seconds());
  }

  // operators
  {
    detail::Stopwatch sw;
    const Window& w = o.bc_operator_window;
    const auto ops = build_ladder(doi_peliti(w));
    const auto tr = birth_coagulation(o.bc_alpha, o.bc_beta_operator, BirthCoagulationForm::Transitions, ops);
    const auto co = birth_coagulation(o.bc_alpha, o.bc_beta_operator, BirthCoagulationForm::LadderComposition, ops);
    const auto nf = birth_coagulation(o.bc_alpha, o.bc_beta_operator, BirthCoagulationForm::NormalForm, ops);
    const auto le = op_from_ladder_expansion(birth_coagulation_table(o.bc_alpha, o.bc_beta_operator, w), ops);
    const long lo = w.n_min() + 2, hi = w.n_max() - 3;
    report.expect_le("operator.birth_coagulation.composition", column_deviation(tr, co, lo, hi), tol);
    report.expect_le("operator.birth_coagulation.normal_form", column_deviation(tr, nf, lo, hi), tol);
    report.expect_le("operator.birth_coagulation.ladder_expansion", column_deviation(tr, le, lo, hi), tol);

    const Window& ew = o.expansion_window;
    const auto bops = build_ladder(bosonic(ew));
    auto rng = next_rng();
    TransitionTable table(ew);
    for (long n = ew.n_min(); n <= ew.n_max(); ++n) {
      for (long k = n - o.expansion_band; k <= n + o.expansion_band; ++k) {
        if (ew.contains(k) && rng.uniform() < 0.5) table.set(n, k, {rng.uniform() - 0.5, rng.uniform() - 0.5});
      }
    }
    const long band = o.expansion_band;
    report.expect_le("operator.ladder_expansion.random",
                     column_deviation(op_from_transitions(table), op_from_ladder_expansion(table, bops),
                                      ew.n_min() + band, ew.n_max() - band),
                     tol);

    const Window sw5{0, 5};
    const auto ops5 = build_ladder(doi_peliti(sw5));
    std::vector<Complex> derivs(31, 1.0);
    const auto series = number_series_op(derivs, ops5);
    const auto exact = op_from_eigenvalues([](long n) { return Complex(std::exp(static_cast<double>(n))); }, sw5);
    report.expect_le("operator.number_series", (series.m - exact.m).cwiseAbs().maxCoeff(), std::max(tol, 1e-10),
                     "exp(N), 31 terms");
    report.add_timing("operator", sw.seconds());
  }

  // kinetics
  {
    detail::Stopwatch sw;
    const Window& w = o.kinetics_window;
    const RateModel model = birth_coagulation_rates(o.bc_alpha, o.bc_beta_kinetics, w);
    const auto run = detail::check_kinetics(report, "kinetics", model, delta_state(w, 1), o.kinetics_T, 0,
                                            o.record_every, tol);
    report.add_timing("kinetics.integrate", sw.seconds());
    detail::ensure_dir(cfg.out_dir);
    export_trajectory(run.direct, cfg.format,
                      cfg.out_dir / (cfg.format == Format::Csv ? "verify_trajectory.csv" : "verify_trajectory.json"));

    detail::Stopwatch ssw;
    detail::check_ssa(report, "kinetics", model, 1, o.ssa_T, o.ssa_runs, o.seed, o.threads);
    const RateModel yule = pure_birth_rates(o.yule_alpha, o.yule_window);
    const SsaResult y = ssa_oracle(yule, 1, o.yule_T, o.ssa_runs, o.seed + 1, {o.threads});
    Check c{"kinetics.yule_mean", CheckStatus::Pass, std::abs(y.mean - std::exp(o.yule_alpha * o.yule_T)),
            kSsaSigmas * y.mean_se, "analytic mean exp(alpha T)"};
    if (o.ssa_runs < kMinSsaRuns) {
      c.status = CheckStatus::InsufficientStatistics;
    } else if (!(c.deviation <= c.tolerance)) {
      c.status = CheckStatus::Fail;
    }
    report.add(c);
    report.add_timing("kinetics.ssa", ssw.seconds());
  }

  // contexts
  {
    detail::Stopwatch sw;
    auto rng = next_rng();
    const Window w{0, static_cast<long>(o.outcomes) - 1};
    const OperatorMatrix A = op_from_eigenvalues([](long n) { return Complex(static_cast<double>(n)); }, w);
    double roundtrip = 0.0, independence = 0.0, no_interference = 0.0, identity = 0.0, normalization = 0.0;
    double realness = 0.0, born = 0.0, quantum_tp = 0.0, phase_root = 0.0;
    for (std::size_t inst = 0; inst < o.instances; ++inst) {
      const RealVector p = detail::random_distribution(rng, o.outcomes);
      RealVector beta(p.size());
      Vector phi(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        beta(i) = 2.0 * std::numbers::pi * rng.uniform();
        phi(i) = std::polar(0.5 + rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
      }
      std::vector<EncodingParams> families{{Family::Quantum, 1.0, beta, {}},
                                           {Family::DoiPeliti, 1.0, beta, {}},
                                           {Family::PowerR, 0.3, beta, {}},
                                           {Family::GeneralPhi, 1.0, {}, phi}};
      std::vector<Complex> reference;
      for (const auto& params : families) {
        const ContextVector ctx = encode(p, params);
        // Measured rather than decode()d, so a tight tolerance fails the check instead of aborting.
        roundtrip = std::max(roundtrip, (ctx.c.cwiseProduct(ctx.b) - p.cast<Complex>()).cwiseAbs().maxCoeff());
        for (int s = 0; s <= 4; ++s) {
          const Complex m = expect_moment(ctx, A, s);
          if (reference.size() <= static_cast<std::size_t>(s)) {
            reference.push_back(m);
          } else {
            independence = std::max(independence, std::abs(m - reference[static_cast<std::size_t>(s)]));
          }
        }
      }

      // Doi-Peliti convex mixture with shared phases.
      const RealVector q = detail::random_distribution(rng, o.outcomes);
      const double p1 = 0.05 + 0.9 * rng.uniform();
      const double p2 = 1.0 - p1;
      const EncodingParams dp{Family::DoiPeliti, 1.0, beta, {}};
      const auto c1 = encode(p, dp);
      const auto c2 = encode(q, dp);
      const auto mix = MixtureParams::convex(p1, p2);
      const auto combined = combine(c1, c2, mix);
      const auto tp = total_probability(combined, c1, c2, mix);
      const Complex norm = combined.b.transpose() * combined.c;
      const Complex mean = combined.b.transpose() * (A.m * combined.c);
      no_interference = std::max({no_interference, tp.R.cwiseAbs().maxCoeff(), std::abs(norm - 1.0),
                                  std::abs(mean - (p1 * expect_moment(c1, A, 1) + p2 * expect_moment(c2, A, 1)))});

      // General mixture of general_phi contexts with random complex g.
      Vector phi2(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) phi2(i) = std::polar(0.5 + rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
      const auto g1 = std::polar(0.5 + rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
      const auto g2 = std::polar(0.5 + rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
      const auto gmix = MixtureParams::general(p1, p2, g1, g2, p1 / g1, p2 / g2);
      const auto e1 = encode(p, {Family::GeneralPhi, 1.0, {}, phi});
      const auto e2 = encode(q, {Family::GeneralPhi, 1.0, {}, phi2});
      const auto gtp = total_probability(combine(e1, e2, gmix), e1, e2, gmix);
      identity = std::max(identity, gtp.identity_residual);
      normalization = std::max(normalization, std::abs(std::abs(gtp.P.sum() - 1.0) - std::abs(gtp.sum_R)));

      // Quantum branch: mu Gamma_n from the amplitude ratio.
      InterferenceParams ip;
      ip.mu = std::sqrt(p2 / p1);
      ip.Gamma = (q.array() / p.array()).sqrt();
      ip.gamma = RealVector(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) ip.gamma(i) = 0.1 + (std::numbers::pi - 0.2) * rng.uniform();
      ip.delta = 0.0;
      const Vector general = interference_general(ip, p1, p2, p, q);
      RealVector theta(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) theta(i) = ip.theta(i);
      const auto closed = closed_form_interference(p1, p2, p, q, QuantumInterference{theta});
      realness = std::max(realness, general.imag().cwiseAbs().maxCoeff());
      born = std::max(born, (general.real() - closed.P).cwiseAbs().maxCoeff());

      // The same P from quantum contexts combined with g = mu_i p_i, q = 1/mu_i.
      RealVector beta2(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) beta2(i) = beta(i) - ip.gamma(i);
      const auto qa = encode(p, {Family::Quantum, 1.0, beta, {}});
      const auto qb = encode(q, {Family::Quantum, 1.0, beta2, {}});
      const Complex mu1 = std::sqrt(p2 / p1);
      const auto qmix = MixtureParams::general(p1, p2, mu1 * p1, p2, 1.0 / mu1, 1.0);
      const auto qtp = total_probability(combine(qa, qb, qmix), qa, qb, qmix);
      quantum_tp = std::max(quantum_tp, (qtp.P - closed.P.cast<Complex>()).cwiseAbs().maxCoeff());

      const auto delta = solve_global_phase(p1, p2, p, q, ip.gamma);
      if (!delta) {
        phase_root = std::numeric_limits<double>::infinity();
      } else {
        RealVector shifted = ip.gamma.array() + *delta;
        const auto balanced = closed_form_interference(p1, p2, p, q, QuantumInterference{shifted});
        phase_root = std::max(phase_root, std::abs(balanced.sum - 1.0));
      }
    }
    report.expect_le("context.roundtrip", roundtrip, tol);
    report.expect_le("context.representation_independence", independence, tol, "moments s = 0..4");
    report.expect_le("context.no_interference", no_interference, tol);
    report.expect_le("context.decomposition_identity", identity, tol);
    report.expect_le("context.normalization_equivalence", normalization, tol);
    report.expect_le("context.branch_realness", realness, 1e-10);
    report.expect_le("context.branch_closed_form", born, tol);
    report.expect_le("context.quantum_mixture_closed_form", quantum_tp, tol);
    report.expect_le("context.global_phase_root", phase_root, tol);

    const RealVector half = RealVector::Constant(2, 0.5);
    RealVector slit_phases(2);
    slit_phases << 0.0, std::numbers::pi;
    const auto slit = closed_form_interference(0.5, 0.5, half, half, QuantumInterference{slit_phases});
    RealVector expected(2);
    expected << 1.0, 0.0;
    report.expect_le("context.two_slit", std::max((slit.P - expected).cwiseAbs().maxCoeff(), std::abs(slit.sum - 1.0)),
                     tol);
    report.add_timing("context", sw.seconds());
  }
  report.add_timing("total", total.seconds());

  detail::ensure_dir(cfg.out_dir);
  export_json(report.to_json(cfg.include_timings), cfg.out_dir / "report.json");
  return report;
}

}  // namespace gfock::cli
