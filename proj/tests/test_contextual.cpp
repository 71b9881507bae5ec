#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "gfock/contextual.hpp"

using namespace gfock;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kPi = std::numbers::pi;

RealVector random_distribution(std::mt19937_64& gen, Eigen::Index n, bool with_zero = false) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  RealVector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = u(gen);
  if (with_zero) p(0) = 0.0;
  return p / p.sum();
}

RealVector random_phases(std::mt19937_64& gen, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-kPi, kPi);
  RealVector b(n);
  for (Eigen::Index i = 0; i < n; ++i) b(i) = u(gen);
  return b;
}

EncodingParams params_for(Family family, std::mt19937_64& gen, Eigen::Index n) {
  EncodingParams e;
  e.family = family;
  e.beta = random_phases(gen, n);
  e.r = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
  if (family == Family::GeneralPhi) {
    std::uniform_real_distribution<double> u(0.2, 3.0);
    e.phi = Vector(n);
    for (Eigen::Index i = 0; i < n; ++i) e.phi(i) = std::polar(u(gen), u(gen));
  }
  return e;
}

}  // namespace

TEST_CASE("encode_decode_round_trip_all_families") {
  std::mt19937_64 gen(17);
  for (Family family : {Family::Quantum, Family::DoiPeliti, Family::PowerR, Family::GeneralPhi}) {
    for (int trial = 0; trial < 25; ++trial) {
      const RealVector p = random_distribution(gen, 7, trial % 5 == 0);
      const auto ctx = encode(p, params_for(family, gen, 7));
      CHECK(ctx.family == family);
      CHECK((decode(ctx) - p).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("encode_explicit_coordinates") {
  RealVector p(2);
  p << 0.25, 0.75;
  const auto q = encode(p, {Family::Quantum, 1.0, {}, {}});
  CHECK_THAT(q.c(0).real(), WithinAbs(0.5, 1e-15));
  CHECK_THAT(q.b(1).real(), WithinAbs(std::sqrt(0.75), 1e-15));
  const auto dp = encode(p, {Family::DoiPeliti, 1.0, {}, {}});
  CHECK(dp.c(1) == Complex(0.75));
  CHECK(dp.b(0) == Complex(1.0));
  EncodingParams half{Family::PowerR, 0.5, {}, {}};
  const auto pr = encode(p, half);
  CHECK((pr.c - q.c).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("power_r_zero_probability") {
  RealVector p(3);
  p << 0.0, 0.4, 0.6;
  // r = 0 and r = 1 use 0^0 = 1 on one side.
  for (double r : {0.0, 1.0, 0.3}) {
    const auto ctx = encode(p, {Family::PowerR, r, {}, {}});
    CHECK((decode(ctx) - p).cwiseAbs().maxCoeff() <= 1e-15);
  }
  CHECK(encode(p, {Family::PowerR, 0.0, {}, {}}).c(0) == Complex(1.0));
  CHECK_THROWS_AS(encode(p, {Family::PowerR, 1.5, {}, {}}), Error);
}

TEST_CASE("encode_errors") {
  RealVector p(2);
  p << 0.5, 0.5;
  EncodingParams g{Family::GeneralPhi, 1.0, {}, Vector::Zero(2)};
  g.phi(0) = 1.0;
  try {
    encode(p, g);
    FAIL("expected ZeroPhi");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroPhi);
  }
  CHECK_THROWS_AS(encode(p, {Family::Quantum, 1.0, RealVector::Zero(3), {}}), Error);

  ContextVector bad{Vector::Constant(2, Complex(0.0, 0.5)), Vector::Constant(2, 1.0), Family::DoiPeliti};
  try {
    decode(bad);
    FAIL("expected NotAProbability");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotAProbability);
  }
  ContextVector unnormalized{Vector::Constant(2, 0.4), Vector::Constant(2, 1.0), Family::DoiPeliti};
  CHECK_THROWS_AS(decode(unnormalized), Error);
}

TEST_CASE("moments_match_direct_sums") {
  std::mt19937_64 gen(23);
  const Window w(0, 5);
  const auto A = op_from_eigenvalues([](long n) { return Complex(0.5 * static_cast<double>(n) - 1.0); }, w);
  for (Family family : {Family::Quantum, Family::DoiPeliti, Family::PowerR, Family::GeneralPhi}) {
    for (int trial = 0; trial < 10; ++trial) {
      const RealVector p = random_distribution(gen, 6);
      const auto ctx = encode(p, params_for(family, gen, 6));
      for (int s = 0; s <= 4; ++s) {
        double expected = 0.0;
        for (long n = 0; n <= 5; ++n) expected += std::pow(0.5 * static_cast<double>(n) - 1.0, s) * p(n);
        CHECK(std::abs(expect_moment(ctx, A, s) - expected) <= 1e-12);
      }
      const auto z = [](Complex x) { return std::exp(x); };
      double expected = 0.0;
      for (long n = 0; n <= 5; ++n) expected += std::exp(0.5 * static_cast<double>(n) - 1.0) * p(n);
      CHECK(std::abs(expect_function(ctx, A, z) - expected) <= 1e-12);
    }
  }
}

TEST_CASE("moments_reject_non_diagonal") {
  const auto ops = build_ladder(doi_peliti({0, 3}));
  RealVector p = RealVector::Constant(4, 0.25);
  const auto ctx = encode(p, {});
  try {
    expect_moment(ctx, {ops.a, ops.window()}, 1);
    FAIL("expected NonDiagonal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonDiagonal);
  }
  CHECK(std::abs(expect_moment(ctx, {ops.N, ops.window()}, 1) - 1.5) <= 1e-15);
}

TEST_CASE("two_slit_closed_form") {
  RealVector prob(2);
  prob << 0.5, 0.5;
  RealVector phases(2);
  phases << 0.0, kPi;
  const auto res = closed_form_interference(0.5, 0.5, prob, prob, QuantumInterference{phases});
  CHECK_THAT(res.P(0), WithinAbs(1.0, 1e-12));
  CHECK_THAT(res.P(1), WithinAbs(0.0, 1e-12));
  CHECK_THAT(res.sum, WithinAbs(1.0, 1e-12));
}

TEST_CASE("doi_peliti_convex_mixture_has_no_interference") {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 20; ++trial) {
    const RealVector p1 = random_distribution(gen, 5);
    const RealVector p2 = random_distribution(gen, 5);
    const RealVector beta = random_phases(gen, 5);
    const auto c1 = encode(p1, {Family::DoiPeliti, 1.0, beta, {}});
    const auto c2 = encode(p2, {Family::DoiPeliti, 1.0, beta, {}});
    const double w1 = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const auto mix = MixtureParams::convex(w1, 1.0 - w1);
    const auto combined = combine(c1, c2, mix);
    const auto tp = total_probability(combined, c1, c2, mix);
    CHECK(tp.R.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(tp.normalization_deviation <= 1e-12);
    CHECK((tp.P.real() - (w1 * p1 + (1.0 - w1) * p2)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("mixture_errors") {
  RealVector p = RealVector::Constant(3, 1.0 / 3.0);
  RealVector beta1 = RealVector::Zero(3);
  RealVector beta2 = RealVector::Constant(3, 0.3);
  const auto c1 = encode(p, {Family::DoiPeliti, 1.0, beta1, {}});
  const auto c2 = encode(p, {Family::DoiPeliti, 1.0, beta2, {}});
  try {
    combine(c1, c2, MixtureParams::convex(0.5, 0.5));
    FAIL("expected PhaseMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PhaseMismatch);
  }
  try {
    combine(c1, c1, MixtureParams::convex(0.5, 0.6));
    FAIL("expected ConstraintViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConstraintViolation);
  }
  try {
    combine(c1, c2, MixtureParams::general(0.5, 0.5, 1.0, 1.0, 0.5, 0.4));
    FAIL("expected ConstraintViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConstraintViolation);
  }
  const auto q = encode(p, {Family::Quantum, 1.0, {}, {}});
  CHECK_THROWS_AS(combine(q, q, MixtureParams::convex(0.5, 0.5)), Error);
}

TEST_CASE("quantum_general_mixture_matches_born_closed_form") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 20; ++trial) {
    const RealVector p1 = random_distribution(gen, 6);
    const RealVector p2 = random_distribution(gen, 6);
    const RealVector b1 = random_phases(gen, 6);
    const RealVector b2 = random_phases(gen, 6);
    const auto c1 = encode(p1, {Family::Quantum, 1.0, b1, {}});
    const auto c2 = encode(p2, {Family::Quantum, 1.0, b2, {}});
    const double w1 = 0.3;
    const auto mix = MixtureParams::general(w1, 1.0 - w1, std::sqrt(w1), std::sqrt(1.0 - w1), std::sqrt(w1),
                                            std::sqrt(1.0 - w1));
    const auto tp = total_probability(combine(c1, c2, mix), c1, c2, mix);
    CHECK(tp.identity_residual <= 1e-12);
    const auto born = closed_form_interference(w1, 1.0 - w1, p1, p2, QuantumInterference{b1 - b2});
    CHECK((tp.P - born.P.cast<Complex>()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(tp.sum_R - (born.sum - 1.0)) <= 1e-12);
  }
}

TEST_CASE("realness_branches_match_closed_forms") {
  RealVector prob1(4), prob2(4);
  prob1 << 0.1, 0.2, 0.3, 0.4;
  prob2 << 0.4, 0.3, 0.2, 0.1;
  const double p1 = 0.6, p2 = 0.4;
  InterferenceParams ip;
  ip.mu = 1.0;
  ip.Gamma = RealVector(4);
  ip.gamma = RealVector(4);
  // Outcome 0 in phase, 1 anti-phase, 2 on the quantum branch, 3 with no real solution.
  ip.gamma << 0.0, kPi, 1.0, 1.0;
  ip.Gamma << 1.7, 0.4, std::sqrt(p2 * prob2(2) / (p1 * prob1(2))), 2.0;
  const auto branches = realness_branch(ip, p1, p2, prob1, prob2);
  REQUIRE(branches.size() == 4u);
  CHECK(branches[0] == Branch::InPhase);
  CHECK(branches[1] == Branch::AntiPhase);
  CHECK(branches[2] == Branch::Quantum);
  CHECK(branches[3] == Branch::NoRealSolution);
  CHECK(branch_name(branches[2]) == "quantum_branch");

  const Vector general = interference_general(ip, p1, p2, prob1, prob2);
  for (int n = 0; n < 3; ++n) CHECK(std::abs(general(n).imag()) <= 1e-10);
  CHECK(std::abs(general(3).imag()) > 1e-3);

  const auto lin = closed_form_interference(p1, p2, prob1, prob2, LinearInterference{ip.Gamma, {Sign::Plus, Sign::Minus, Sign::Plus, Sign::Plus}});
  CHECK_THAT(general(0).real(), WithinAbs(lin.P(0), 1e-12));
  CHECK_THAT(general(1).real(), WithinAbs(lin.P(1), 1e-12));
  const auto born = closed_form_interference(p1, p2, prob1, prob2, QuantumInterference{ip.gamma});
  CHECK_THAT(general(2).real(), WithinAbs(born.P(2), 1e-12));
}

TEST_CASE("branch_consistency_random_instances") {
  std::mt19937_64 gen(2718);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const RealVector prob1 = random_distribution(gen, 5);
    const RealVector prob2 = random_distribution(gen, 5);
    const double p1 = 0.1 + 0.8 * u(gen);
    const double p2 = 1.0 - p1;
    InterferenceParams ip;
    ip.mu = 0.5 + u(gen);
    ip.Gamma = RealVector(5);
    ip.gamma = RealVector(5);
    std::vector<Sign> signs;
    for (Eigen::Index n = 0; n < 5; ++n) {
      const int pick = static_cast<int>(gen() % 3);
      if (pick == 0) {
        ip.gamma(n) = 2.0 * kPi * static_cast<double>(gen() % 3);
        ip.Gamma(n) = (0.2 + 2.0 * u(gen)) / ip.mu;
        signs.push_back(Sign::Plus);
      } else if (pick == 1) {
        ip.gamma(n) = kPi * (2.0 * static_cast<double>(gen() % 3) + 1.0);
        ip.Gamma(n) = (0.2 + 2.0 * u(gen)) / ip.mu;
        signs.push_back(Sign::Minus);
      } else {
        ip.gamma(n) = 0.3 + 2.5 * u(gen);
        ip.Gamma(n) = std::sqrt(p2 * prob2(n) / (p1 * prob1(n))) / ip.mu;
        signs.push_back(Sign::Plus);
      }
    }
    const auto branches = realness_branch(ip, p1, p2, prob1, prob2);
    const Vector general = interference_general(ip, p1, p2, prob1, prob2);
    RealVector mg(5);
    for (Eigen::Index n = 0; n < 5; ++n) mg(n) = ip.mu_gamma(n);
    const auto lin = closed_form_interference(p1, p2, prob1, prob2, LinearInterference{mg, signs});
    const auto born = closed_form_interference(p1, p2, prob1, prob2, QuantumInterference{ip.gamma});
    for (Eigen::Index n = 0; n < 5; ++n) {
      REQUIRE(branches[static_cast<std::size_t>(n)] != Branch::NoRealSolution);
      CHECK(std::abs(general(n).imag()) <= 1e-10);
      const double closed = branches[static_cast<std::size_t>(n)] == Branch::Quantum ? born.P(n) : lin.P(n);
      CHECK(std::abs(general(n).real() - closed) <= 1e-12);
    }
  }
}

TEST_CASE("interference_errors") {
  RealVector prob1(2), prob2(2);
  prob1 << 0.0, 1.0;
  prob2 << 0.5, 0.5;
  InterferenceParams ip;
  ip.Gamma = RealVector::Constant(2, 1.0);
  ip.gamma = RealVector::Constant(2, 1.0);
  try {
    realness_branch(ip, 0.5, 0.5, prob1, prob2);
    FAIL("expected ZeroPrior");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroPrior);
  }
  ip.Gamma(1) = -1.0;
  ip.gamma(0) = 0.0;
  try {
    realness_branch(ip, 0.5, 0.5, prob1, prob2);
    FAIL("expected NonpositiveMuGamma");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonpositiveMuGamma);
  }
  CHECK_THROWS_AS(closed_form_interference(0.5, 0.5, prob1, prob2, LinearInterference{ip.Gamma, {Sign::Plus, Sign::Plus}}),
                  Error);
}

TEST_CASE("phase_distance_wraps") {
  CHECK_THAT(phase_distance(2.0 * kPi, 0.0), WithinAbs(0.0, 1e-15));
  CHECK_THAT(phase_distance(-kPi, kPi), WithinAbs(0.0, 1e-15));
  CHECK_THAT(phase_distance(0.5, 0.0), WithinAbs(0.5, 1e-15));
  CHECK_THAT(phase_distance(-0.5, 0.0), WithinAbs(0.5, 1e-15));
}

TEST_CASE("global_phase_root") {
  std::mt19937_64 gen(5150);
  for (int trial = 0; trial < 20; ++trial) {
    const RealVector prob1 = random_distribution(gen, 4);
    const RealVector prob2 = random_distribution(gen, 4);
    const RealVector gamma = random_phases(gen, 4);
    const auto delta = solve_global_phase(0.4, 0.6, prob1, prob2, gamma);
    REQUIRE(delta.has_value());
    const auto res = closed_form_interference(0.4, 0.6, prob1, prob2, QuantumInterference{(gamma.array() + *delta).matrix()});
    CHECK_THAT(res.sum, WithinAbs(1.0, 1e-12));
  }
  // Disjoint supports: every delta works.
  RealVector a(2), b(2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  CHECK(solve_global_phase(0.5, 0.5, a, b, RealVector::Zero(2)) == 0.0);
}
