#pragma once

// Kolmogorov forward (master) equation on a truncated window:
//
//   dp_n/dt = sum_k w_{kn} p_k,   w_{kn} = lambda_{nk} (k != n),   w_{nn} = -sum_s lambda_{sn}
//
// integrated directly from the rates and, alternatively, as d|u>/dt = W|u>
// with |u> = sum_n p_n |n>. An exact-jump stochastic simulation serves as the
// independent check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "gfock/error.hpp"
#include "gfock/operator_builder.hpp"
#include "gfock/window.hpp"

namespace gfock {

/// Absolute bound on |sum p + escaped - 1| for the fixed-step integrators.
inline constexpr double kIntegratorTol = 1e-10;
/// Default step rule: dt * max|w_nn| <= kStepSafety.
inline constexpr double kStepSafety = 0.1;
inline constexpr double kBlowUpBound = 10.0;

/// Nonnegative rates lambda_{nk} for the jump k -> n. Sources must lie in the
/// window; a target outside the window is an escape.
class RateModel {
 public:
  RateModel() = default;
  explicit RateModel(Window w) : window_(w) {}

  const Window& window() const noexcept { return window_; }
  /// Keyed by (target n, source k).
  const std::map<std::pair<long, long>, double>& rates() const noexcept { return rates_; }

  void set_rate(long target, long source, double rate) {
    if (!window_.contains(source)) {
      throw Error(ErrorKind::OutOfWindow, "rate source " + std::to_string(source) + " outside " + window_.str());
    }
    if (target == source) {
      throw Error(ErrorKind::InvalidArgument, "diagonal rates are not allowed");
    }
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
      throw Error(ErrorKind::InvalidArgument, "rates must be finite and nonnegative");
    }
    if (rate == 0.0) {
      rates_.erase({target, source});
    } else {
      rates_[{target, source}] = rate;
    }
  }

  double rate(long target, long source) const {
    const auto it = rates_.find({target, source});
    return it == rates_.end() ? 0.0 : it->second;
  }

  /// (target, rate) pairs leaving `source`, ascending by target.
  std::vector<std::pair<long, double>> outgoing(long source) const {
    std::vector<std::pair<long, double>> out;
    for (const auto& [key, rate] : rates_) {
      if (key.second == source) out.emplace_back(key.first, rate);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  Window window_;
  std::map<std::pair<long, long>, double> rates_;
};

/// Birth n -> n+1 at alpha n and coagulation n -> n-1 at beta n(n-1).
/// The birth out of n_max is kept as an escape.
inline RateModel birth_coagulation_rates(double alpha, double beta, const Window& w) {
  RateModel m(w);
  for (long n = w.n_min(); n <= w.n_max(); ++n) {
    const double x = static_cast<double>(n);
    if (alpha * x > 0.0) m.set_rate(n + 1, n, alpha * x);
    if (beta * x * (x - 1.0) > 0.0 && w.contains(n - 1)) m.set_rate(n - 1, n, beta * x * (x - 1.0));
  }
  return m;
}

inline RateModel pure_birth_rates(double alpha, const Window& w) { return birth_coagulation_rates(alpha, 0.0, w); }

/// Generator table: w_{nk} = lambda_{kn} for in-window k, w_{nn} = -(total rate out of n),
/// escapes recorded as outflow.
///
/// The diagonal is the negated running sum of the off-diagonal entries taken in
/// ascending target order followed by the outflow, so `generator_row_sum`
/// returns exactly zero.
inline TransitionTable w_from_rates(const RateModel& model) {
  const Window& win = model.window();
  TransitionTable w(win);
  for (long n = win.n_min(); n <= win.n_max(); ++n) {
    double total = 0.0;
    double escape = 0.0;
    for (const auto& [target, rate] : model.outgoing(n)) {
      if (win.contains(target)) {
        w.set(n, target, rate);
        total += rate;
      } else {
        escape += rate;
      }
    }
    if (escape != 0.0) w.set_outflow(n, escape);
    total += escape;
    if (total != 0.0) w.set(n, n, -total);
  }
  return w;
}

/// (sum_{k != n} w_{nk} ascending + outflow_n) + w_{nn}.
inline Complex generator_row_sum(const TransitionTable& w, long n) {
  Complex acc = 0.0;
  Complex diag = 0.0;
  for (const auto& [key, value] : w.entries()) {
    if (key.first != n) continue;
    if (key.second == n) {
      diag = value;
    } else {
      acc += value;
    }
  }
  acc += w.outflow(n);
  return acc + diag;
}

struct DistributionState {
  RealVector p;
  double t = 0.0;
};

inline DistributionState delta_state(const Window& w, long n) {
  DistributionState s{RealVector::Zero(w.dim()), 0.0};
  s.p(w.index(n)) = 1.0;
  return s;
}

/// Sampled solution. `leakage` is 1 - sum p; `escaped` is the independently
/// integrated probability flux through the window boundary.
struct Trajectory {
  Window window;
  std::vector<double> times;
  std::vector<DistributionState> states;
  std::vector<double> leakage;
  std::vector<double> escaped;
  /// max |Im u_n| seen (Fock route only).
  double max_imag = 0.0;
};

struct EvolveOptions {
  /// Record every k-th step; the final step is always recorded.
  std::size_t record_every = 1;
};

inline std::size_t default_steps(double max_diag_rate, double T) {
  if (T <= 0.0 || max_diag_rate <= 0.0) return 1;
  return static_cast<std::size_t>(std::ceil(T * max_diag_rate / kStepSafety));
}

inline std::size_t default_steps(const TransitionTable& w, double T) {
  double worst = 0.0;
  for (const auto& [key, value] : w.entries()) {
    if (key.first == key.second) worst = std::max(worst, std::abs(value));
  }
  return default_steps(worst, T);
}

namespace detail {

// Classical RK4 on x' = G x together with the scalar loss e' = l . x.
template <class Vec, class Apply, class Loss, class Record>
void rk4(Vec x, double T, std::size_t steps, std::size_t record_every, const Apply& apply, const Loss& loss,
         const Record& record) {
  if (steps == 0) throw Error(ErrorKind::InvalidArgument, "steps must be >= 1");
  if (record_every == 0) record_every = 1;
  double escaped = 0.0;
  record(0.0, x, escaped);
  if (T == 0.0) return;
  if (T < 0.0) throw Error(ErrorKind::InvalidArgument, "T must be nonnegative");
  const double dt = T / static_cast<double>(steps);
  Vec k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size()), tmp(x.size());
  for (std::size_t step = 1; step <= steps; ++step) {
    apply(x, k1);
    const double e1 = loss(x);
    tmp = x + (0.5 * dt) * k1;
    apply(tmp, k2);
    const double e2 = loss(tmp);
    tmp = x + (0.5 * dt) * k2;
    apply(tmp, k3);
    const double e3 = loss(tmp);
    tmp = x + dt * k3;
    apply(tmp, k4);
    const double e4 = loss(tmp);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    escaped += (dt / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
    if (x.cwiseAbs().maxCoeff() > kBlowUpBound || !x.allFinite()) {
      throw Error(ErrorKind::UnstableStep, "state exceeded " + std::to_string(kBlowUpBound) + " at step " +
                                               std::to_string(step) + "; reduce the step size");
    }
    if (step % record_every == 0 || step == steps) {
      record(step == steps ? T : dt * static_cast<double>(step), x, escaped);
    }
  }
}

}  // namespace detail

/// Integrates the master equation from the rate table with fixed-step RK4.
inline Trajectory evolve_direct(const RateModel& model, const DistributionState& p0, double T, std::size_t steps,
                                const EvolveOptions& opts = {}) {
  const Window& win = model.window();
  if (p0.p.size() != win.dim()) throw Error(ErrorKind::InvalidArgument, "p0 size does not match the window");
  if (std::abs(p0.p.sum() - 1.0) > 1e-9 || p0.p.minCoeff() < -1e-12) {
    throw Error(ErrorKind::NotAProbability, "p0 is not a normalized distribution");
  }
  const TransitionTable w = w_from_rates(model);

  struct Flow {
    Eigen::Index from;
    Eigen::Index to;
    double rate;
  };
  std::vector<Flow> flows;
  for (const auto& [key, value] : w.entries()) {
    flows.push_back({win.index(key.first), win.index(key.second), value.real()});
  }
  std::vector<std::pair<Eigen::Index, double>> outflow;
  for (const auto& [n, value] : w.outflow()) outflow.emplace_back(win.index(n), value.real());

  const auto apply = [&flows](const RealVector& p, RealVector& dp) {
    dp.setZero();
    for (const auto& fl : flows) dp(fl.to) += fl.rate * p(fl.from);
  };
  const auto loss = [&outflow](const RealVector& p) {
    double acc = 0.0;
    for (const auto& [i, rate] : outflow) acc += rate * p(i);
    return acc;
  };

  Trajectory traj;
  traj.window = win;
  const auto record = [&traj](double t, const RealVector& p, double escaped) {
    traj.times.push_back(t);
    traj.states.push_back({p, t});
    traj.leakage.push_back(1.0 - p.sum());
    traj.escaped.push_back(escaped);
  };
  detail::rk4(RealVector(p0.p), T, steps, opts.record_every, apply, loss, record);
  return traj;
}

/// Integrates d|u>/dt = W|u>; the coefficients of |u> are the probabilities.
/// Boundary flux is taken from the column sums of W.
inline Trajectory evolve_fock(const OperatorMatrix& W, const Vector& u0, double T, std::size_t steps,
                              const EvolveOptions& opts = {}) {
  const Window& win = W.window;
  if (u0.size() != win.dim()) throw Error(ErrorKind::InvalidArgument, "u0 size does not match the window");
  const Eigen::SparseMatrix<Complex> sparse = W.m.sparseView(Complex(0.0), 0.0);
  const Eigen::RowVectorXcd col_sums = W.m.colwise().sum();

  const auto apply = [&sparse](const Vector& u, Vector& du) { du.noalias() = sparse * u; };
  const auto loss = [&col_sums](const Vector& u) { return -(col_sums * u)(0).real(); };

  Trajectory traj;
  traj.window = win;
  const auto record = [&traj](double t, const Vector& u, double escaped) {
    const RealVector p = u.real();
    traj.times.push_back(t);
    traj.states.push_back({p, t});
    traj.leakage.push_back(1.0 - p.sum());
    traj.escaped.push_back(escaped);
    traj.max_imag = std::max(traj.max_imag, u.imag().cwiseAbs().maxCoeff());
  };
  detail::rk4(Vector(u0), T, steps, opts.record_every, apply, loss, record);
  return traj;
}

/// sum_n n^power p_n over the window labels.
inline double distribution_moment(const Window& w, const RealVector& p, int power) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) acc += std::pow(static_cast<double>(w.label(i)), power) * p(i);
  return acc;
}

// --- stochastic simulation -------------------------------------------------

/// SplitMix64 finalizer, used to derive per-run seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Run r draws from std::mt19937_64 seeded with splitmix64(seed ^ splitmix64(r)).
/// Uniforms are (bits >> 11) * 2^-53, so every number drawn is fixed by the
/// standard engine definition and does not depend on the library's distributions.
class RunRng {
 public:
  RunRng(std::uint64_t seed, std::uint64_t run) : engine_(splitmix64(seed ^ splitmix64(run))) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform in (0, 1].
  double uniform_open0() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

struct SsaOptions {
  unsigned threads = 1;
};

struct SsaResult {
  std::size_t runs = 0;
  std::size_t escapes = 0;
  /// counts / runs over the window; escaped runs are excluded, so the deficit equals the escape fraction.
  RealVector distribution;
  double mean = 0.0;
  double variance = 0.0;
  double mean_se = 0.0;
  double second_moment = 0.0;
  double second_moment_se = 0.0;

  double escape_fraction() const { return runs == 0 ? 0.0 : static_cast<double>(escapes) / static_cast<double>(runs); }
};

/// Exact-jump simulation of the rate model up to time T, `runs` independent
/// trajectories from n0. A jump out of the window censors the run.
inline SsaResult ssa_oracle(const RateModel& model, long n0, double T, std::size_t runs, std::uint64_t seed,
                            const SsaOptions& opts = {}) {
  const Window& win = model.window();
  if (runs == 0) throw Error(ErrorKind::InvalidArgument, "runs must be >= 1");
  if (!win.contains(n0)) throw Error(ErrorKind::OutOfWindow, "n0 outside " + win.str());

  struct Jumps {
    std::vector<std::pair<long, double>> targets;
    double total = 0.0;
  };
  std::vector<Jumps> table(win.size());
  for (long n = win.n_min(); n <= win.n_max(); ++n) {
    auto& j = table[static_cast<std::size_t>(win.index(n))];
    j.targets = model.outgoing(n);
    for (const auto& [target, rate] : j.targets) j.total += rate;
  }

  // Final label per run; escapes marked with `escaped`.
  std::vector<long> finals(runs);
  std::vector<char> escaped(runs, 0);
  const auto simulate = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      RunRng rng(seed, r);
      long n = n0;
      double t = 0.0;
      bool out = false;
      while (true) {
        const auto& j = table[static_cast<std::size_t>(win.index(n))];
        if (j.total <= 0.0) break;
        t += -std::log(rng.uniform_open0()) / j.total;
        if (t > T) break;
        const double pick = rng.uniform() * j.total;
        double acc = 0.0;
        long next = j.targets.back().first;
        for (const auto& [target, rate] : j.targets) {
          acc += rate;
          if (pick < acc) {
            next = target;
            break;
          }
        }
        n = next;
        if (!win.contains(n)) {
          out = true;
          break;
        }
      }
      finals[r] = n;
      escaped[r] = out ? 1 : 0;
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(runs)));
  if (threads == 1) {
    simulate(0, runs);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (runs + threads - 1) / threads;
    for (unsigned i = 0; i < threads; ++i) {
      const std::size_t begin = i * chunk;
      const std::size_t end = std::min(runs, begin + chunk);
      if (begin < end) pool.emplace_back(simulate, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  SsaResult res;
  res.runs = runs;
  res.distribution = RealVector::Zero(win.dim());
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  std::size_t kept = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    if (escaped[r]) {
      ++res.escapes;
      continue;
    }
    const double x = static_cast<double>(finals[r]);
    res.distribution(win.index(finals[r])) += 1.0;
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
    ++kept;
  }
  res.distribution /= static_cast<double>(runs);
  if (kept > 0) {
    const double m = static_cast<double>(kept);
    res.mean = s1 / m;
    res.second_moment = s2 / m;
    if (kept > 1) {
      res.variance = (s2 - m * res.mean * res.mean) / (m - 1.0);
      const double var_sq = (s4 - m * res.second_moment * res.second_moment) / (m - 1.0);
      res.mean_se = std::sqrt(std::max(res.variance, 0.0) / m);
      res.second_moment_se = std::sqrt(std::max(var_sq, 0.0) / m);
    }
  }
  return res;
}

}  // namespace gfock
