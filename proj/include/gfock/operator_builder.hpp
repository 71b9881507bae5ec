#pragma once

// Operators on the truncated Fock space, built three ways:
//   * from a transition table  W|n> = sum_k w_{nk} |k>
//   * from an eigenvalue function  A|n> = alpha(n)|n>  (and its N power series)
//   * from the ladder expansion, where n-dependent coefficients are bound to the
//     source column before powers of a / a^dag act.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "gfock/error.hpp"
#include "gfock/fock_core.hpp"
#include "gfock/window.hpp"

namespace gfock {

/// Sparse coefficients w_{nk} keyed by (source n, target k).
///
/// `outflow` carries, per source n, the total weight sent to labels outside the
/// window. It never enters a matrix; it only closes the row sums of generators
/// produced from rate models.
class TransitionTable {
 public:
  using Key = std::pair<long, long>;

  TransitionTable() = default;
  explicit TransitionTable(Window w) : window_(w) {}

  const Window& window() const noexcept { return window_; }
  const std::map<Key, Complex>& entries() const noexcept { return entries_; }
  const std::map<long, Complex>& outflow() const noexcept { return outflow_; }

  void set(long n, long k, Complex value) {
    if (!window_.contains(n) || !window_.contains(k)) {
      throw Error(ErrorKind::OutOfWindow, "entry (" + std::to_string(n) + ", " + std::to_string(k) +
                                              ") outside " + window_.str());
    }
    entries_[{n, k}] = value;
  }
  void add(long n, long k, Complex value) {
    const auto it = entries_.find({n, k});
    set(n, k, (it == entries_.end() ? Complex(0.0) : it->second) + value);
  }
  void set_outflow(long n, Complex value) {
    if (!window_.contains(n)) {
      throw Error(ErrorKind::OutOfWindow, "outflow source " + std::to_string(n) + " outside " + window_.str());
    }
    outflow_[n] = value;
  }

  Complex get(long n, long k) const {
    const auto it = entries_.find({n, k});
    return it == entries_.end() ? Complex(0.0) : it->second;
  }
  Complex outflow(long n) const {
    const auto it = outflow_.find(n);
    return it == outflow_.end() ? Complex(0.0) : it->second;
  }

  /// max |n - k| over stored entries.
  long band() const {
    long b = 0;
    for (const auto& [key, value] : entries_) b = std::max(b, std::labs(key.first - key.second));
    return b;
  }

 private:
  Window window_;
  std::map<Key, Complex> entries_;
  std::map<long, Complex> outflow_;
};

struct OperatorMatrix {
  Matrix m;
  Window window;
};

/// alpha(n) given as a callable, with optional Taylor data alpha^(s)(0), s = 0..S.
struct EigenvalueFunction {
  std::function<Complex(long)> alpha;
  std::vector<Complex> derivatives;
};

/// Column n holds w_{nk} at row k.
inline OperatorMatrix op_from_transitions(const TransitionTable& w) {
  const Window& win = w.window();
  OperatorMatrix op{Matrix::Zero(win.dim(), win.dim()), win};
  for (const auto& [key, value] : w.entries()) {
    op.m(win.index(key.second), win.index(key.first)) = value;
  }
  return op;
}

inline OperatorMatrix op_from_eigenvalues(const std::function<Complex(long)>& alpha, const Window& win) {
  OperatorMatrix op{Matrix::Zero(win.dim(), win.dim()), win};
  for (long n = win.n_min(); n <= win.n_max(); ++n) op.m(win.index(n), win.index(n)) = alpha(n);
  return op;
}

/// Exact diagonal evaluation; the basis diagonalizes any alpha(N).
inline OperatorMatrix op_from_eigenvalues(const EigenvalueFunction& alpha, const LadderOps& ops) {
  return op_from_eigenvalues(alpha.alpha, ops.window());
}

/// sum_{s=0}^{S} alpha^(s)(0) / s! * N^s with N = a^dag a as built.
inline OperatorMatrix number_series_op(const std::vector<Complex>& derivatives, const LadderOps& ops) {
  if (derivatives.empty()) {
    throw Error(ErrorKind::InvalidArgument, "number series needs at least the s = 0 coefficient");
  }
  const Eigen::Index dim = ops.window().dim();
  OperatorMatrix op{Matrix::Zero(dim, dim), ops.window()};
  Matrix power = Matrix::Identity(dim, dim);
  double factorial = 1.0;
  for (std::size_t s = 0; s < derivatives.size(); ++s) {
    if (s > 0) {
      power = power * ops.N;
      factorial *= static_cast<double>(s);
    }
    op.m += (derivatives[s] / factorial) * power;
  }
  return op;
}

/// Ladder-expansion route. For every source column n the coefficient
/// w_{nk} / prod(phi or f) is evaluated at that n, then a^(n-k) or
/// a^dag^(k-n) acts on e_n as a truncated matrix power.
inline OperatorMatrix op_from_ladder_expansion(const TransitionTable& w, const LadderOps& ops) {
  const Window& win = ops.window();
  if (!(w.window() == win)) {
    throw Error(ErrorKind::OutOfWindow, "table window " + w.window().str() + " differs from ladder window " + win.str());
  }
  const long band = w.band();
  if (band >= static_cast<long>(win.size())) {
    throw Error(ErrorKind::InvalidArgument, "table band exceeds the window");
  }

  std::vector<Matrix> lower_pow{Matrix::Identity(win.dim(), win.dim())};
  std::vector<Matrix> raise_pow{Matrix::Identity(win.dim(), win.dim())};
  for (long p = 1; p <= band; ++p) {
    lower_pow.push_back(ops.a * lower_pow.back());
    raise_pow.push_back(ops.a_dag * raise_pow.back());
  }

  OperatorMatrix op{Matrix::Zero(win.dim(), win.dim()), win};
  for (const auto& [key, value] : w.entries()) {
    const auto [n, k] = key;
    const Eigen::Index col = win.index(n);
    if (k == n) {
      op.m(col, col) += value;
      continue;
    }
    Complex path = 1.0;
    const Matrix* power = nullptr;
    if (k < n) {
      for (long s = k + 1; s <= n; ++s) path *= ops.spec.phi(s);
      power = &lower_pow[static_cast<std::size_t>(n - k)];
    } else {
      for (long s = n; s <= k - 1; ++s) path *= ops.spec.f(s);
      power = &raise_pow[static_cast<std::size_t>(k - n)];
    }
    if (path == Complex(0.0) || !is_defined(path)) {
      throw Error(ErrorKind::ZeroDivisor, "ladder path for w(" + std::to_string(n) + ", " + std::to_string(k) +
                                              ") has a vanishing coefficient");
    }
    op.m.col(col) += (value / path) * power->col(col);
  }
  return op;
}

enum class BirthCoagulationForm {
  Transitions,        // rate table
  LadderComposition,  // beta (a - a^dag a)(a^dag a - 1) + alpha (a^dag - 1) a^dag a
  NormalForm,         // beta (1 - a^dag) a^dag a^2 + alpha (a^dag - 1) a^dag a
};

/// w_{n,n+1} = alpha n, w_{nn} = -alpha n - beta n(n-1), w_{n,n-1} = beta n(n-1);
/// entries whose target leaves the window are dropped.
inline TransitionTable birth_coagulation_table(double alpha, double beta, const Window& win) {
  TransitionTable w(win);
  for (long n = win.n_min(); n <= win.n_max(); ++n) {
    const double x = static_cast<double>(n);
    const double birth = alpha * x;
    const double coag = beta * x * (x - 1.0);
    w.set(n, n, -birth - coag);
    if (win.contains(n + 1)) w.set(n, n + 1, birth);
    if (win.contains(n - 1)) w.set(n, n - 1, coag);
  }
  return w;
}

inline OperatorMatrix birth_coagulation(double alpha, double beta, BirthCoagulationForm form, const LadderOps& ops) {
  if (form == BirthCoagulationForm::Transitions) {
    return op_from_transitions(birth_coagulation_table(alpha, beta, ops.window()));
  }
  if (!matches_doi_peliti(ops.spec)) {
    throw Error(ErrorKind::WrongPreset, "ladder compositions of the birth-coagulation operator assume f = 1, phi(n) = n");
  }
  const Eigen::Index dim = ops.window().dim();
  const Matrix I = Matrix::Identity(dim, dim);
  const Matrix& a = ops.a;
  const Matrix& ad = ops.a_dag;
  const Matrix N = ad * a;
  const Matrix birth = alpha * ((ad - I) * N);
  if (form == BirthCoagulationForm::LadderComposition) {
    return {beta * ((a - N) * (N - I)) + birth, ops.window()};
  }
  return {beta * ((I - ad) * ad * a * a) + birth, ops.window()};
}

/// max |A(i, n) - B(i, n)| over columns n in [lo, hi].
inline double column_deviation(const OperatorMatrix& A, const OperatorMatrix& B, long lo, long hi) {
  double worst = 0.0;
  for (long n = lo; n <= hi; ++n) {
    const Eigen::Index col = A.window.index(n);
    worst = std::max(worst, (A.m.col(col) - B.m.col(col)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace gfock
