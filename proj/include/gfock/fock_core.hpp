#pragma once

// Generalized Fock space: ladder functions f, phi, F, K over a truncated
// integer window and their raising/lowering matrices.
//
//   a^dag |n> = f(n)   |n+1>
//   a     |n> = phi(n) |n-1>
//   [a, a^dag] |n> = K(n) |n>,   F(n) = f(n) phi(n+1),   F(n) - F(n-1) = K(n)

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gfock/error.hpp"
#include "gfock/window.hpp"

namespace gfock {

/// A ladder function evaluated at integer labels.
using LadderFn = std::function<Complex(long)>;

inline constexpr double kDefaultTol = 1e-12;

inline Complex undefined_value() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan};
}

inline bool is_defined(Complex z) { return !std::isnan(z.real()) && !std::isnan(z.imag()); }

/// Wraps an explicit table as a LadderFn; lookups outside the table throw OutOfTable.
inline LadderFn table_fn(std::map<long, Complex> table, std::string name = "table") {
  return [table = std::move(table), name = std::move(name)](long n) -> Complex {
    auto it = table.find(n);
    if (it == table.end()) {
      throw Error(ErrorKind::OutOfTable, name + " has no entry for n = " + std::to_string(n));
    }
    return it->second;
  };
}

/// Builds a table over consecutive labels starting at `first`.
inline LadderFn table_fn(long first, const std::vector<Complex>& values, std::string name = "table") {
  std::map<long, Complex> table;
  for (std::size_t i = 0; i < values.size(); ++i) table.emplace(first + static_cast<long>(i), values[i]);
  return table_fn(std::move(table), std::move(name));
}

inline LadderFn constant_fn(Complex value) {
  return [value](long) { return value; };
}

/// Values over the guarded range [n_min - 1, n_max + 1].
class GuardedTable {
 public:
  GuardedTable() = default;
  explicit GuardedTable(const Window& w) : first_(w.n_min() - 1), values_(w.size() + 2, undefined_value()) {}

  long first() const noexcept { return first_; }
  long last() const noexcept { return first_ + static_cast<long>(values_.size()) - 1; }
  bool covers(long n) const noexcept { return n >= first_ && n <= last(); }

  Complex operator()(long n) const {
    if (!covers(n)) return undefined_value();
    return values_[static_cast<std::size_t>(n - first_)];
  }
  Complex& at(long n) {
    if (!covers(n)) {
      throw Error(ErrorKind::OutOfWindow, "guarded table has no slot for n = " + std::to_string(n));
    }
    return values_[static_cast<std::size_t>(n - first_)];
  }

 private:
  long first_ = 0;
  std::vector<Complex> values_;
};

/// f and phi given directly; F and K are derived.
struct DirectLadder {
  LadderFn f;
  LadderFn phi;
};

/// K, F(0) and f given; F follows from the telescoping recurrence and phi from F/f.
struct CommutatorLadder {
  LadderFn K;
  Complex F0 = 1.0;
  LadderFn f;
};

struct LadderFunctions {
  std::variant<DirectLadder, CommutatorLadder> source;
};

enum class Preset { None, DoiPeliti, Bosonic };

struct ResolvedSpec {
  Window window;
  GuardedTable f;
  GuardedTable phi;
  GuardedTable F;
  GuardedTable K;
  Preset preset = Preset::None;
};

namespace detail {

// F(n) for any n by walking from F(0) = F0: ascending F(n) = F(n-1) + K(n),
// descending F(n) = F(n+1) - K(n+1).
inline GuardedTable telescope_F(const Window& w, const LadderFn& K, Complex F0) {
  GuardedTable F(w);
  const long lo = F.first();
  const long hi = F.last();
  Complex value = F0;
  if (lo <= 0 && 0 <= hi) F.at(0) = F0;
  for (long n = 1; n <= hi; ++n) {
    value += K(n);
    if (n >= lo) F.at(n) = value;
  }
  value = F0;
  for (long n = -1; n >= lo; --n) {
    value -= K(n + 1);
    if (n <= hi) F.at(n) = value;
  }
  return F;
}

}  // namespace detail

/// Tabulates f, phi, F, K on the window plus one guard label on each side.
///
/// Entries that cannot be formed from the inputs (e.g. phi(n_min - 1) in the
/// commutator form) are left undefined (NaN) and never enter any check.
/// When f(n-1) = 0 and F(n-1) = 0 the lowering coefficient phi(n) is set to
/// zero (the vacuum condition a|n_min> = 0); f(n-1) = 0 with F(n-1) != 0 on an
/// in-window label throws ZeroDivisor.
inline ResolvedSpec resolve_ladder_functions(const LadderFunctions& funcs, const Window& w) {
  ResolvedSpec spec;
  spec.window = w;
  spec.f = GuardedTable(w);
  spec.phi = GuardedTable(w);
  spec.F = GuardedTable(w);
  spec.K = GuardedTable(w);
  const long lo = w.n_min() - 1;
  const long hi = w.n_max() + 1;

  if (const auto* direct = std::get_if<DirectLadder>(&funcs.source)) {
    for (long n = lo; n <= hi; ++n) {
      spec.f.at(n) = direct->f(n);
      spec.phi.at(n) = direct->phi(n);
    }
    for (long n = lo; n < hi; ++n) spec.F.at(n) = spec.f(n) * spec.phi(n + 1);
    for (long n = w.n_min(); n <= w.n_max(); ++n) spec.K.at(n) = spec.F(n) - spec.F(n - 1);
    return spec;
  }

  const auto& comm = std::get<CommutatorLadder>(funcs.source);
  for (long n = lo; n <= hi; ++n) {
    spec.f.at(n) = comm.f(n);
    spec.K.at(n) = comm.K(n);
  }
  spec.F = detail::telescope_F(w, comm.K, comm.F0);
  for (long n = w.n_min(); n <= hi; ++n) {
    const Complex Fprev = spec.F(n - 1);
    const Complex fprev = spec.f(n - 1);
    if (fprev != Complex(0.0)) {
      spec.phi.at(n) = Fprev / fprev;
    } else if (Fprev == Complex(0.0)) {
      spec.phi.at(n) = 0.0;
    } else if (w.contains(n)) {
      throw Error(ErrorKind::ZeroDivisor,
                  "f(" + std::to_string(n - 1) + ") = 0 while F(" + std::to_string(n - 1) +
                      ") != 0; phi(" + std::to_string(n) + ") is undefined");
    }
  }
  return spec;
}

/// K = 1, F0 = 1, f = 1: phi(n) = n.
inline ResolvedSpec doi_peliti(const Window& w) {
  auto spec = resolve_ladder_functions({CommutatorLadder{constant_fn(1.0), 1.0, constant_fn(1.0)}}, w);
  spec.preset = Preset::DoiPeliti;
  return spec;
}

/// K = 1, F0 = 1, f = sqrt(n + 1): phi(n) = sqrt(n).
inline ResolvedSpec bosonic(const Window& w) {
  const LadderFn f = [](long n) { return std::sqrt(Complex(static_cast<double>(n) + 1.0)); };
  auto spec = resolve_ladder_functions({CommutatorLadder{constant_fn(1.0), 1.0, f}}, w);
  spec.preset = Preset::Bosonic;
  return spec;
}

/// True when f == 1 and phi(n) == n on the window.
inline bool matches_doi_peliti(const ResolvedSpec& spec, double tol = kDefaultTol) {
  if (spec.preset == Preset::DoiPeliti) return true;
  for (long n = spec.window.n_min(); n <= spec.window.n_max(); ++n) {
    if (std::abs(spec.f(n) - 1.0) > tol) return false;
    if (std::abs(spec.phi(n) - static_cast<double>(n)) > tol) return false;
  }
  return true;
}

/// max |F(n) - F(n-1) - K(n)| over the window.
inline double recurrence_residual(const ResolvedSpec& spec) {
  double worst = 0.0;
  for (long n = spec.window.n_min(); n <= spec.window.n_max(); ++n) {
    worst = std::max(worst, std::abs(spec.F(n) - spec.F(n - 1) - spec.K(n)));
  }
  return worst;
}

/// max |phi(n) f(n-1) - F(n-1)| over the window.
inline double phi_residual(const ResolvedSpec& spec) {
  double worst = 0.0;
  for (long n = spec.window.n_min(); n <= spec.window.n_max(); ++n) {
    worst = std::max(worst, std::abs(spec.phi(n) * spec.f(n - 1) - spec.F(n - 1)));
  }
  return worst;
}

struct LadderOps {
  Matrix a;
  Matrix a_dag;
  Matrix N;
  ResolvedSpec spec;

  const Window& window() const noexcept { return spec.window; }
};

/// Dense truncated matrices; transitions leaving the window are dropped.
inline LadderOps build_ladder(const ResolvedSpec& spec) {
  const Window& w = spec.window;
  LadderOps ops;
  ops.spec = spec;
  ops.a = Matrix::Zero(w.dim(), w.dim());
  ops.a_dag = Matrix::Zero(w.dim(), w.dim());
  for (long n = w.n_min(); n <= w.n_max(); ++n) {
    if (w.contains(n - 1)) ops.a(w.index(n - 1), w.index(n)) = spec.phi(n);
    if (w.contains(n + 1)) ops.a_dag(w.index(n + 1), w.index(n)) = spec.f(n);
  }
  ops.N = ops.a_dag * ops.a;
  return ops;
}

/// Columns on which one-a/one-a^dag identities survive truncation:
/// n_min+1 .. n_max-1, extended down to n_min when phi(n_min) = 0.
inline std::pair<long, long> interior_range(const ResolvedSpec& spec) {
  const long lo = spec.phi(spec.window.n_min()) == Complex(0.0) ? spec.window.n_min() : spec.window.n_min() + 1;
  return {lo, spec.window.n_max() - 1};
}

/// max over interior n of || ([a, a^dag] - K(n)) e_n ||_inf.
inline double commutator_deviation(const LadderOps& ops) {
  const Window& w = ops.window();
  const Matrix comm = ops.a * ops.a_dag - ops.a_dag * ops.a;
  const auto [lo, hi] = interior_range(ops.spec);
  double worst = 0.0;
  for (long n = lo; n <= hi; ++n) {
    const Eigen::Index col = w.index(n);
    for (Eigen::Index row = 0; row < w.dim(); ++row) {
      const Complex expected = row == col ? ops.spec.K(n) : Complex(0.0);
      worst = std::max(worst, std::abs(comm(row, col) - expected));
    }
  }
  return worst;
}

/// max over interior n of || (a^dag a - F(n-1)) e_n ||_inf.
inline double number_operator_deviation(const LadderOps& ops) {
  const Window& w = ops.window();
  const auto [lo, hi] = interior_range(ops.spec);
  double worst = 0.0;
  for (long n = lo; n <= hi; ++n) {
    const Eigen::Index col = w.index(n);
    for (Eigen::Index row = 0; row < w.dim(); ++row) {
      const Complex expected = row == col ? ops.spec.F(n - 1) : Complex(0.0);
      worst = std::max(worst, std::abs(ops.N(row, col) - expected));
    }
  }
  return worst;
}

/// |f(n) - phi(n+1)| <= tol for every band entry, i.e. a^dag is the transpose
/// partner of a.
inline bool adjointness_holds(const ResolvedSpec& spec, double tol = kDefaultTol) {
  for (long n = spec.window.n_min(); n < spec.window.n_max(); ++n) {
    if (std::abs(spec.f(n) - spec.phi(n + 1)) > tol) return false;
  }
  return true;
}

/// |n> rebuilt from |0> by repeated raising (n > 0) or lowering (n < 0),
/// normalized by the product of ladder coefficients along the path.
inline Vector basis_vector_via_ladder(long n, const LadderOps& ops) {
  const Window& w = ops.window();
  if (!w.contains(n) || !w.contains(0)) {
    throw Error(ErrorKind::OutOfWindow, "basis construction needs 0 and " + std::to_string(n) + " in " + w.str());
  }
  Vector v = unit_vector(w, 0);
  Complex norm = 1.0;
  if (n > 0) {
    for (long k = 0; k < n; ++k) {
      v = ops.a_dag * v;
      norm *= ops.spec.f(k);
    }
  } else {
    for (long k = 0; k > n; --k) {
      v = ops.a * v;
      norm *= ops.spec.phi(k);
    }
  }
  if (norm == Complex(0.0)) {
    throw Error(ErrorKind::ZeroDivisor, "ladder path from 0 to " + std::to_string(n) + " has a vanishing coefficient");
  }
  return v / norm;
}

}  // namespace gfock
