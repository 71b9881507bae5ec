#pragma once

// Contexts as dual coordinate pairs (c_n, b_n) with c_n b_n = p_n, their
// statistics, and the generalized formula of total probability for two
// combined contexts.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gfock/error.hpp"
#include "gfock/operator_builder.hpp"
#include "gfock/window.hpp"

namespace gfock {

inline constexpr double kPhaseTol = 1e-9;

enum class Family { Quantum, DoiPeliti, PowerR, GeneralPhi, Mixture };

inline std::string family_name(Family f) {
  switch (f) {
    case Family::Quantum: return "quantum";
    case Family::DoiPeliti: return "doi_peliti";
    case Family::PowerR: return "power_r";
    case Family::GeneralPhi: return "general_phi";
    case Family::Mixture: return "mixture";
  }
  return "unknown";
}

struct ContextVector {
  Vector c;
  Vector b;
  Family family = Family::DoiPeliti;
};

struct EncodingParams {
  Family family = Family::DoiPeliti;
  double r = 1.0;
  /// Phases beta_n in radians; empty means all zero.
  RealVector beta;
  /// Phi_n for the general family.
  Vector phi;
};

namespace detail {

inline Complex phase(const RealVector& beta, Eigen::Index n, double sign) {
  if (beta.size() == 0) return 1.0;
  return std::polar(1.0, sign * beta(n));
}

}  // namespace detail

/// Builds (c, b) for a distribution p:
///   quantum     c = sqrt(p) e^{i beta},  b = sqrt(p) e^{-i beta}
///   doi_peliti  c = p e^{i beta},        b = e^{-i beta}
///   power_r     c = p^r e^{i beta},      b = p^{1-r} e^{-i beta}   (0^0 = 1)
///   general_phi c = p Phi,               b = 1 / Phi
inline ContextVector encode(const RealVector& p, const EncodingParams& params) {
  const Eigen::Index dim = p.size();
  if (params.beta.size() != 0 && params.beta.size() != dim) {
    throw Error(ErrorKind::InvalidArgument, "phase vector length does not match the distribution");
  }
  ContextVector ctx{Vector(dim), Vector(dim), params.family};
  switch (params.family) {
    case Family::Quantum:
      for (Eigen::Index n = 0; n < dim; ++n) {
        const double amp = std::sqrt(p(n));
        ctx.c(n) = amp * detail::phase(params.beta, n, 1.0);
        ctx.b(n) = amp * detail::phase(params.beta, n, -1.0);
      }
      break;
    case Family::DoiPeliti:
      for (Eigen::Index n = 0; n < dim; ++n) {
        ctx.c(n) = p(n) * detail::phase(params.beta, n, 1.0);
        ctx.b(n) = detail::phase(params.beta, n, -1.0);
      }
      break;
    case Family::PowerR:
      for (Eigen::Index n = 0; n < dim; ++n) {
        if (p(n) == 0.0 && (params.r < 0.0 || params.r > 1.0)) {
          throw Error(ErrorKind::InvalidArgument, "power_r with r outside [0, 1] is singular at p_n = 0");
        }
        // std::pow(0, 0) == 1
        ctx.c(n) = std::pow(p(n), params.r) * detail::phase(params.beta, n, 1.0);
        ctx.b(n) = std::pow(p(n), 1.0 - params.r) * detail::phase(params.beta, n, -1.0);
      }
      break;
    case Family::GeneralPhi:
      if (params.phi.size() != dim) {
        throw Error(ErrorKind::InvalidArgument, "Phi vector length does not match the distribution");
      }
      for (Eigen::Index n = 0; n < dim; ++n) {
        if (params.phi(n) == Complex(0.0)) throw Error(ErrorKind::ZeroPhi, "Phi_" + std::to_string(n) + " = 0");
        ctx.c(n) = p(n) * params.phi(n);
        ctx.b(n) = 1.0 / params.phi(n);
      }
      break;
    case Family::Mixture:
      throw Error(ErrorKind::InvalidArgument, "mixture contexts come from combine()");
  }
  return ctx;
}

/// p_n = c_n b_n, checked to be a real normalized distribution.
inline RealVector decode(const ContextVector& ctx, double tol = kDefaultTol) {
  if (ctx.c.size() != ctx.b.size()) throw Error(ErrorKind::InvalidArgument, "c and b differ in length");
  const Vector prod = ctx.c.cwiseProduct(ctx.b);
  for (Eigen::Index n = 0; n < prod.size(); ++n) {
    if (std::abs(prod(n).imag()) > tol) {
      throw Error(ErrorKind::NotAProbability, "c_n b_n has imaginary part at index " + std::to_string(n));
    }
    if (prod(n).real() < -tol) {
      throw Error(ErrorKind::NotAProbability, "c_n b_n is negative at index " + std::to_string(n));
    }
  }
  const RealVector p = prod.real();
  if (std::abs(p.sum() - 1.0) > tol) {
    throw Error(ErrorKind::NotAProbability, "sum c_n b_n = " + std::to_string(p.sum()));
  }
  return p;
}

inline void require_diagonal(const Matrix& A, double tol = 0.0) {
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      if (i != j && std::abs(A(i, j)) > tol) {
        throw Error(ErrorKind::NonDiagonal, "observable operator must be diagonal in the basis");
      }
    }
  }
}

/// <u| A^s |u> = b^T A^s c (no conjugation: b are dual coordinates).
inline Complex expect_moment(const ContextVector& ctx, const OperatorMatrix& A, int s) {
  require_diagonal(A.m);
  if (s < 0) throw Error(ErrorKind::InvalidArgument, "moment order must be >= 0");
  Vector v = ctx.c;
  for (int i = 0; i < s; ++i) v = A.m * v;
  return ctx.b.transpose() * v;
}

/// <u| z(A) |u> with z(A) = diag(z(a_n)).
inline Complex expect_function(const ContextVector& ctx, const OperatorMatrix& A,
                               const std::function<Complex(Complex)>& z) {
  require_diagonal(A.m);
  Complex acc = 0.0;
  for (Eigen::Index n = 0; n < ctx.c.size(); ++n) acc += ctx.b(n) * z(A.m(n, n)) * ctx.c(n);
  return acc;
}

enum class MixtureMode { General, DoiPelitiConvex };

struct MixtureParams {
  double p1 = 0.5;
  double p2 = 0.5;
  MixtureMode mode = MixtureMode::General;
  Complex g1 = 1.0, g2 = 1.0, q1 = 1.0, q2 = 1.0;

  static MixtureParams convex(double p1, double p2) {
    MixtureParams m;
    m.p1 = p1;
    m.p2 = p2;
    m.mode = MixtureMode::DoiPelitiConvex;
    return m;
  }
  static MixtureParams general(double p1, double p2, Complex g1, Complex g2, Complex q1, Complex q2) {
    return {p1, p2, MixtureMode::General, g1, g2, q1, q2};
  }
};

/// Combined pair. General: c = g1 c1 + g2 c2, b = q1 b1 + q2 b2 with g_i q_i = p_i.
/// Convex: c = p1 c1 + p2 c2, b = b1, for two doi_peliti contexts sharing phases.
inline ContextVector combine(const ContextVector& ctx1, const ContextVector& ctx2, const MixtureParams& mix,
                             double tol = kDefaultTol) {
  if (ctx1.c.size() != ctx2.c.size()) throw Error(ErrorKind::InvalidArgument, "contexts differ in size");
  if (std::abs(mix.p1 + mix.p2 - 1.0) > tol) {
    throw Error(ErrorKind::ConstraintViolation, "p1 + p2 must equal 1");
  }
  ContextVector out;
  out.family = Family::Mixture;
  if (mix.mode == MixtureMode::DoiPelitiConvex) {
    if (ctx1.family != Family::DoiPeliti || ctx2.family != Family::DoiPeliti) {
      throw Error(ErrorKind::InvalidArgument, "convex mixture needs two doi_peliti contexts");
    }
    if ((ctx1.b - ctx2.b).cwiseAbs().maxCoeff() > kPhaseTol) {
      throw Error(ErrorKind::PhaseMismatch, "convex mixture needs equal phase vectors");
    }
    out.c = mix.p1 * ctx1.c + mix.p2 * ctx2.c;
    out.b = ctx1.b;
    return out;
  }
  if (std::abs(mix.g1 * mix.q1 - mix.p1) > tol || std::abs(mix.g2 * mix.q2 - mix.p2) > tol) {
    throw Error(ErrorKind::ConstraintViolation, "g_i q_i must equal p_i");
  }
  out.c = mix.g1 * ctx1.c + mix.g2 * ctx2.c;
  out.b = mix.q1 * ctx1.b + mix.q2 * ctx2.b;
  return out;
}

struct TotalProbability {
  Vector P;
  Vector R;
  Complex sum_R = 0.0;
  /// max_n |P_n - p1 p1_n - p2 p2_n - R_n|
  double identity_residual = 0.0;
  /// |sum P - 1|
  double normalization_deviation = 0.0;
};

/// P_n = c_n b_n of the combined pair, split into the classical part and the
/// interference term R_n. Never renormalizes.
inline TotalProbability total_probability(const ContextVector& combined, const ContextVector& ctx1,
                                          const ContextVector& ctx2, const MixtureParams& mix) {
  TotalProbability out;
  out.P = combined.c.cwiseProduct(combined.b);
  const Vector classical =
      mix.p1 * ctx1.c.cwiseProduct(ctx1.b) + mix.p2 * ctx2.c.cwiseProduct(ctx2.b);
  if (mix.mode == MixtureMode::General) {
    out.R = mix.g2 * mix.q1 * ctx2.c.cwiseProduct(ctx1.b) + mix.g1 * mix.q2 * ctx1.c.cwiseProduct(ctx2.b);
  } else {
    out.R = out.P - classical;
  }
  out.sum_R = out.R.sum();
  out.identity_residual = (out.P - classical - out.R).cwiseAbs().maxCoeff();
  out.normalization_deviation = std::abs(out.P.sum() - 1.0);
  return out;
}

enum class Sign { Plus, Minus };

struct QuantumInterference {
  /// gamma_n + delta per outcome.
  RealVector phases;
};

struct LinearInterference {
  RealVector mu_gamma;
  std::vector<Sign> signs;
};

struct ClosedFormResult {
  RealVector P;
  double sum = 0.0;
};

/// Born-rule closed form:
///   P_n = p1 p1_n + p2 p2_n + 2 sqrt(p1 p2 p1_n p2_n) cos(theta_n)
inline ClosedFormResult closed_form_interference(double p1, double p2, const RealVector& prob1,
                                                 const RealVector& prob2, const QuantumInterference& mode) {
  const Eigen::Index dim = prob1.size();
  if (prob2.size() != dim || mode.phases.size() != dim) {
    throw Error(ErrorKind::InvalidArgument, "closed form inputs differ in size");
  }
  ClosedFormResult out{RealVector(dim), 0.0};
  for (Eigen::Index n = 0; n < dim; ++n) {
    out.P(n) = p1 * prob1(n) + p2 * prob2(n) +
               2.0 * std::sqrt(p1 * p2 * prob1(n) * prob2(n)) * std::cos(mode.phases(n));
  }
  out.sum = out.P.sum();
  return out;
}

/// In-phase (+) / anti-phase (-) closed forms with linear interference:
///   P_n = (1 +- mG_n) p1 p1_n + (1 +- 1/mG_n) p2 p2_n
inline ClosedFormResult closed_form_interference(double p1, double p2, const RealVector& prob1,
                                                 const RealVector& prob2, const LinearInterference& mode) {
  const Eigen::Index dim = prob1.size();
  if (prob2.size() != dim || mode.mu_gamma.size() != dim || static_cast<Eigen::Index>(mode.signs.size()) != dim) {
    throw Error(ErrorKind::InvalidArgument, "closed form inputs differ in size");
  }
  ClosedFormResult out{RealVector(dim), 0.0};
  for (Eigen::Index n = 0; n < dim; ++n) {
    const double mg = mode.mu_gamma(n);
    if (!(mg > 0.0)) throw Error(ErrorKind::NonpositiveMuGamma, "mu Gamma_n must be positive");
    const double s = mode.signs[static_cast<std::size_t>(n)] == Sign::Plus ? 1.0 : -1.0;
    out.P(n) = (1.0 + s * mg) * p1 * prob1(n) + (1.0 + s / mg) * p2 * prob2(n);
  }
  out.sum = out.P.sum();
  return out;
}

struct InterferenceParams {
  double mu = 1.0;
  RealVector Gamma;
  RealVector gamma;
  double delta = 0.0;

  double mu_gamma(Eigen::Index n) const { return mu * Gamma(n); }
  double theta(Eigen::Index n) const { return gamma(n) + delta; }
};

/// General interference expression before the realness conditions:
///   P_n = p1 p1_n + p2 p2_n + mG_n p1 p1_n e^{i theta_n} + p2 p2_n e^{-i theta_n} / mG_n
inline Vector interference_general(const InterferenceParams& params, double p1, double p2, const RealVector& prob1,
                                   const RealVector& prob2) {
  const Eigen::Index dim = prob1.size();
  Vector P(dim);
  for (Eigen::Index n = 0; n < dim; ++n) {
    const double mg = params.mu_gamma(n);
    if (!(mg > 0.0)) throw Error(ErrorKind::NonpositiveMuGamma, "mu Gamma_n must be positive");
    const double a = p1 * prob1(n);
    const double b = p2 * prob2(n);
    P(n) = a + b + mg * a * std::polar(1.0, params.theta(n)) + (b / mg) * std::polar(1.0, -params.theta(n));
  }
  return P;
}

enum class Branch { Quantum, InPhase, AntiPhase, NoRealSolution };

inline std::string branch_name(Branch b) {
  switch (b) {
    case Branch::Quantum: return "quantum_branch";
    case Branch::InPhase: return "in_phase";
    case Branch::AntiPhase: return "anti_phase";
    case Branch::NoRealSolution: return "no_real_solution";
  }
  return "unknown";
}

/// Distance of theta from the nearest multiple of 2 pi plus `offset`.
inline double phase_distance(double theta, double offset) {
  const double two_pi = 2.0 * std::numbers::pi;
  double d = std::fmod(theta - offset, two_pi);
  if (d < 0.0) d += two_pi;
  return std::min(d, two_pi - d);
}

/// Which real-valued solution each outcome admits.
inline std::vector<Branch> realness_branch(const InterferenceParams& params, double p1, double p2,
                                           const RealVector& prob1, const RealVector& prob2,
                                           double tol = kDefaultTol, double phase_tol = kPhaseTol) {
  const Eigen::Index dim = prob1.size();
  if (prob2.size() != dim || params.Gamma.size() != dim || params.gamma.size() != dim) {
    throw Error(ErrorKind::InvalidArgument, "interference inputs differ in size");
  }
  std::vector<Branch> out;
  out.reserve(static_cast<std::size_t>(dim));
  for (Eigen::Index n = 0; n < dim; ++n) {
    const double theta = params.theta(n);
    if (!(params.mu_gamma(n) > 0.0)) throw Error(ErrorKind::NonpositiveMuGamma, "mu Gamma_n must be positive");
    if (phase_distance(theta, 0.0) <= phase_tol) {
      out.push_back(Branch::InPhase);
      continue;
    }
    if (phase_distance(theta, std::numbers::pi) <= phase_tol) {
      out.push_back(Branch::AntiPhase);
      continue;
    }
    const double prior1 = p1 * prob1(n);
    if (prior1 == 0.0) {
      throw Error(ErrorKind::ZeroPrior, "p1 p1_n = 0 at index " + std::to_string(n) + " with sin(theta) != 0");
    }
    const double required = std::sqrt(p2 * prob2(n) / prior1);
    out.push_back(std::abs(params.mu_gamma(n) - required) <= tol ? Branch::Quantum : Branch::NoRealSolution);
  }
  return out;
}

/// Finds delta in [0, 2 pi) with sum_n 2 sqrt(p1 p2 p1_n p2_n) cos(gamma_n + delta) = 0
/// by scanning a 64-point grid for a sign change and bisecting. When every
/// weight vanishes any delta works and 0 is returned; nullopt means the scan
/// found no sign change.
inline std::optional<double> solve_global_phase(double p1, double p2, const RealVector& prob1,
                                                const RealVector& prob2, const RealVector& gamma,
                                                double tol = 1e-14) {
  const auto sum_R = [&](double delta) {
    double acc = 0.0;
    for (Eigen::Index n = 0; n < prob1.size(); ++n) {
      acc += 2.0 * std::sqrt(p1 * p2 * prob1(n) * prob2(n)) * std::cos(gamma(n) + delta);
    }
    return acc;
  };
  double scale = 0.0;
  for (Eigen::Index n = 0; n < prob1.size(); ++n) scale += std::sqrt(p1 * p2 * prob1(n) * prob2(n));
  if (scale == 0.0) return 0.0;

  constexpr int kGrid = 64;
  const double two_pi = 2.0 * std::numbers::pi;
  double lo = 0.0;
  double f_lo = sum_R(lo);
  for (int i = 1; i <= kGrid; ++i) {
    const double hi = two_pi * i / kGrid;
    const double f_hi = sum_R(hi);
    if (f_lo == 0.0) return lo;
    if ((f_lo < 0.0) != (f_hi < 0.0)) {
      double a = lo, b = hi, fa = f_lo;
      for (int it = 0; it < 200 && b - a > tol; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = sum_R(mid);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      return 0.5 * (a + b);
    }
    lo = hi;
    f_lo = f_hi;
  }
  return std::nullopt;
}

}  // namespace gfock
