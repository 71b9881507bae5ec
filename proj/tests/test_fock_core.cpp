#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>

#include "gfock/fock_core.hpp"

using namespace gfock;
using Catch::Matchers::WithinAbs;

namespace {

// [a, a^dag] on column n straight from the ladder tables.
Complex commutator_from_tables(const ResolvedSpec& s, long n) { return s.f(n) * s.phi(n + 1) - s.f(n - 1) * s.phi(n); }

ResolvedSpec random_f_spec(std::mt19937_64& gen, const Window& w) {
  std::uniform_real_distribution<double> u(0.3, 3.0);
  std::map<long, Complex> f;
  for (long n = w.n_min() - 1; n <= w.n_max() + 1; ++n) f[n] = u(gen);
  return resolve_ladder_functions({CommutatorLadder{constant_fn(1.0), 1.0, table_fn(f, "f")}}, w);
}

}  // namespace

TEST_CASE("window_indexing") {
  const Window w(-3, 4);
  CHECK(w.size() == 8u);
  CHECK(w.index(-3) == 0);
  CHECK(w.index(4) == 7);
  CHECK(w.label(2) == -1);
  CHECK_THROWS_AS(w.index(5), Error);
  CHECK_THROWS_AS(Window(2, 1), Error);
}

TEST_CASE("resolve_doi_peliti_preset") {
  const auto s = doi_peliti({0, 5});
  for (long n = 0; n <= 5; ++n) {
    CHECK(s.phi(n) == Complex(static_cast<double>(n)));
    CHECK(s.F(n) == Complex(static_cast<double>(n) + 1.0));
    CHECK(s.f(n) == Complex(1.0));
  }
}

TEST_CASE("resolve_bosonic_preset") {
  const auto s = bosonic({0, 5});
  for (long n = 0; n <= 5; ++n) {
    CHECK_THAT(s.phi(n).real(), WithinAbs(std::sqrt(static_cast<double>(n)), 1e-14));
    CHECK(s.phi(n).imag() == 0.0);
  }
  // 0/0 at the lower edge resolves to the vacuum condition.
  CHECK(s.phi(0) == Complex(0.0));
}

TEST_CASE("resolve_zero_commutator_gives_constant_F") {
  const Complex c(2.5, -0.5);
  const auto s = resolve_ladder_functions({CommutatorLadder{constant_fn(0.0), c, constant_fn(3.0)}}, {-4, 4});
  for (long n = -5; n <= 5; ++n) CHECK(s.F(n) == c);
}

TEST_CASE("resolve_descending_sum_for_negative_labels") {
  // K(n) = n: F(-1) = F0 - K(0), F(-2) = F0 - K(0) - K(-1), ...
  const LadderFn K = [](long n) { return Complex(static_cast<double>(n)); };
  const auto s = resolve_ladder_functions({CommutatorLadder{K, 1.0, constant_fn(1.0)}}, {-4, 3});
  CHECK(s.F(-1) == Complex(1.0));
  CHECK(s.F(-2) == Complex(2.0));
  CHECK(s.F(-3) == Complex(4.0));
  CHECK(s.F(3) == Complex(7.0));
  CHECK(recurrence_residual(s) == 0.0);
  CHECK(phi_residual(s) < 1e-15);
}

TEST_CASE("resolve_zero_divisor") {
  // f(0) = 0 while F(0) = 1: phi(1) is undefined.
  const LadderFn f = [](long n) { return n == 0 ? Complex(0.0) : Complex(1.0); };
  try {
    resolve_ladder_functions({CommutatorLadder{constant_fn(1.0), 1.0, f}}, {0, 4});
    FAIL("expected ZeroDivisor");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroDivisor);
  }
}

TEST_CASE("resolve_table_outside_range_throws") {
  const auto f = table_fn(0, {1.0, 1.0}, "f");
  CHECK_THROWS_AS(resolve_ladder_functions({DirectLadder{f, f}}, {0, 5}), Error);
}

TEST_CASE("resolve_direct_tables_derive_F_and_K") {
  const LadderFn f = [](long n) { return Complex(2.0 + 0.1 * static_cast<double>(n)); };
  const LadderFn phi = [](long n) { return Complex(0.5 * static_cast<double>(n), 0.25); };
  const auto s = resolve_ladder_functions({DirectLadder{f, phi}}, {-2, 6});
  for (long n = -2; n <= 6; ++n) {
    CHECK(s.F(n) == f(n) * phi(n + 1));
    CHECK(std::abs(s.K(n) - commutator_from_tables(s, n)) < 1e-15);
  }
  CHECK(recurrence_residual(s) < 1e-15);
}

TEST_CASE("build_ladder_bands") {
  const auto dp = build_ladder(doi_peliti({0, 3}));
  Matrix expected_a = Matrix::Zero(4, 4);
  expected_a(0, 1) = 1.0;
  expected_a(1, 2) = 2.0;
  expected_a(2, 3) = 3.0;
  Matrix expected_ad = Matrix::Zero(4, 4);
  expected_ad(1, 0) = expected_ad(2, 1) = expected_ad(3, 2) = 1.0;
  CHECK(dp.a == expected_a);
  CHECK(dp.a_dag == expected_ad);
  // N = diag(0, 1, 2, 3) including the truncated top column.
  CHECK(dp.N == Matrix(RealVector::LinSpaced(4, 0.0, 3.0).cast<Complex>().asDiagonal()));

  const auto bo = build_ladder(bosonic({0, 2}));
  CHECK_THAT(bo.a(0, 1).real(), WithinAbs(1.0, 1e-15));
  CHECK_THAT(bo.a(1, 2).real(), WithinAbs(std::sqrt(2.0), 1e-15));
  CHECK(bo.a.col(0).isZero(0.0));
}

TEST_CASE("commutator_deviation_presets") {
  CHECK(commutator_deviation(build_ladder(doi_peliti({0, 10}))) == 0.0);
  CHECK(commutator_deviation(build_ladder(bosonic({0, 50}))) <= 1e-12);
  // The truncated top column is excluded from the interior.
  const auto ops = build_ladder(doi_peliti({0, 10}));
  const Matrix comm = ops.a * ops.a_dag - ops.a_dag * ops.a;
  CHECK(comm(10, 10) != Complex(1.0));
}

TEST_CASE("commutator_random_f_matches_direct_evaluation") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = random_f_spec(gen, {-5, 5});
    // Oracle: per-column f(n)phi(n+1) - f(n-1)phi(n) against K = 1.
    for (long n = -4; n <= 4; ++n) CHECK(std::abs(commutator_from_tables(spec, n) - 1.0) <= 1e-12);
    CHECK(commutator_deviation(build_ladder(spec)) <= 1e-12);
  }
}

TEST_CASE("number_operator_is_integer_operator") {
  std::mt19937_64 gen(7);
  const auto spec = random_f_spec(gen, {-5, 5});
  const auto ops = build_ladder(spec);
  CHECK(number_operator_deviation(ops) <= 1e-12);
  const auto [lo, hi] = interior_range(spec);
  for (long n = lo; n <= hi; ++n) {
    CHECK_THAT(ops.N(ops.window().index(n), ops.window().index(n)).real(), WithinAbs(static_cast<double>(n), 1e-12));
  }
}

TEST_CASE("adjointness") {
  CHECK(adjointness_holds(bosonic({0, 20})));
  CHECK_FALSE(adjointness_holds(doi_peliti({0, 20})));
  const auto custom = resolve_ladder_functions({DirectLadder{constant_fn(2.0), constant_fn(2.0)}}, {-3, 3});
  CHECK(adjointness_holds(custom));
  const auto ops = build_ladder(bosonic({0, 20}));
  CHECK((ops.a_dag - ops.a.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("basis_vector_via_ladder") {
  const auto dp = build_ladder(doi_peliti({0, 6}));
  CHECK(basis_vector_via_ladder(0, dp) == unit_vector(dp.window(), 0));
  CHECK(basis_vector_via_ladder(3, dp) == unit_vector(dp.window(), 3));
  // Doi-Peliti: raw a^dag^3 e_0 is already e_3.
  CHECK(dp.a_dag * dp.a_dag * dp.a_dag * unit_vector(dp.window(), 0) == unit_vector(dp.window(), 3));

  const auto bo = build_ladder(bosonic({0, 6}));
  const Vector raw = bo.a_dag * bo.a_dag * bo.a_dag * unit_vector(bo.window(), 0);
  CHECK_THAT(raw(3).real(), WithinAbs(std::sqrt(6.0), 1e-14));
  CHECK((basis_vector_via_ladder(3, bo) - unit_vector(bo.window(), 3)).cwiseAbs().maxCoeff() <= 1e-12);

  std::mt19937_64 gen(99);
  const auto rnd = build_ladder(random_f_spec(gen, {-5, 5}));
  for (long n = 0; n <= 5; ++n) {
    CHECK((basis_vector_via_ladder(n, rnd) - unit_vector(rnd.window(), n)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // phi(0) = F(-1)/f(-1) = 0 blocks the descent below 0.
  try {
    basis_vector_via_ladder(-2, rnd);
    FAIL("expected ZeroDivisor");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroDivisor);
  }
}

TEST_CASE("basis_vector_negative_labels") {
  // F0 = 3 keeps F(-k) = 3 - k nonzero for k < 3.
  const auto spec = resolve_ladder_functions({CommutatorLadder{constant_fn(1.0), 3.0, constant_fn(1.0)}}, {-2, 2});
  const auto ops = build_ladder(spec);
  CHECK(spec.phi(0) == Complex(2.0));
  CHECK(spec.phi(-1) == Complex(1.0));
  for (long n = -2; n <= 2; ++n) {
    CHECK((basis_vector_via_ladder(n, ops) - unit_vector(ops.window(), n)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("property_recurrence_holds_for_random_commutators") {
  std::mt19937_64 gen(31337);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const long lo = static_cast<long>(gen() % 11) - 8;
    const Window w(lo, lo + 3 + static_cast<long>(gen() % 12));
    std::map<long, Complex> K;
    for (long n = std::min(lo - 2, -1L); n <= std::max(w.n_max() + 2, 1L); ++n) K[n] = Complex(u(gen), u(gen));
    const Complex F0(u(gen), u(gen));
    const LadderFn f = [](long n) { return Complex(1.0 + 0.01 * static_cast<double>(n * n), 0.5); };
    const auto s = resolve_ladder_functions({CommutatorLadder{table_fn(K, "K"), F0, f}}, w);
    CHECK(recurrence_residual(s) <= 1e-12);
    CHECK(phi_residual(s) <= 1e-12);
    const auto ops = build_ladder(s);
    CHECK(commutator_deviation(ops) <= 1e-12);
    CHECK(number_operator_deviation(ops) <= 1e-12);
  }
}
