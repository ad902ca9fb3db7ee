#pragma once

// Characteristic polynomial of J_n / sqrt(n) through the scaled three-term
// recursion
//   psi_k = (z_k - b_k/sqrt(k)) psi_{k-1} / alpha_k
//         - a_{k-1}^2 / sqrt(k(k-1)) * psi_{k-2} / (alpha_k alpha_{k-1}),
// with z_k = z sqrt(n/k), and the normalization C_n(z) such that
// D_n(z) = C_n(z) psi_n.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "jclt/compensated.hpp"
#include "jclt/ensemble.hpp"
#include "jclt/error.hpp"
#include "jclt/mat2.hpp"

namespace jclt {

/// floor(x) that absorbs the last-ulp rounding of quantities which are
/// integers in exact arithmetic (e.g. 1.9^2 * 400 / 4).
inline long long integer_floor(double x) {
  return static_cast<long long>(std::floor(x + 1e-12 * std::max(1.0, std::abs(x))));
}

enum class Regime { Scalar, Transition, Oscillatory };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Scalar:
      return "scalar";
    case Regime::Transition:
      return "transition";
    case Regime::Oscillatory:
      return "oscillatory";
  }
  return "?";
}

struct CriticalIndices {
  std::size_t n = 0;
  double z = 0.0;
  double kappa = 0.0;
  std::size_t k0 = 0;  // floor(z^2 n / 4)
  std::size_t l0 = 0;  // floor(kappa k0^{1/3})

  [[nodiscard]] double z_k(std::size_t k) const {
    return z * std::sqrt(static_cast<double>(n) / static_cast<double>(k));
  }
  /// k0 - l0, negative when the scalar regime is empty.
  [[nodiscard]] long long scalar_end() const {
    return static_cast<long long>(k0) - static_cast<long long>(l0);
  }
  [[nodiscard]] long long oscillatory_begin() const {
    return static_cast<long long>(k0) + static_cast<long long>(l0);
  }
  [[nodiscard]] Regime regime(std::size_t k) const {
    const auto kk = static_cast<long long>(k);
    if (kk <= scalar_end()) return Regime::Scalar;
    if (kk <= oscillatory_begin()) return Regime::Transition;
    return Regime::Oscillatory;
  }
};

inline void check_z(double z) {
  if (!(std::abs(z) < 2.0) || z == 0.0 || !std::isfinite(z)) {
    throw DomainError("z must lie in (-2, 2) \\ {0}, got " + std::to_string(z));
  }
}

inline CriticalIndices critical_indices(std::size_t n, double z, double kappa) {
  if (n < 1) throw ParameterError("critical_indices: n must be >= 1");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ParameterError("critical_indices: kappa must be > 0");
  check_z(z);
  CriticalIndices ci;
  ci.n = n;
  ci.z = z;
  ci.kappa = kappa;
  ci.k0 = static_cast<std::size_t>(integer_floor(z * z * static_cast<double>(n) / 4.0));
  ci.l0 = static_cast<std::size_t>(integer_floor(kappa * std::cbrt(static_cast<double>(ci.k0))));
  return ci;
}

/// z_k/2 + sqrt(z_k^2/4 - 1 + c_k), the larger root of a^2 - z_k a + (1 - c_k).
inline double alpha_scalar_branch(double zk, double ck) {
  const double disc = zk * zk / 4.0 - 1.0 + ck;
  if (disc < 0.0) throw NumericError("alpha: negative discriminant");
  return zk / 2.0 + std::sqrt(disc);
}

/// alpha_k for a single index. For z < 0 the sign of z is carried by alpha,
/// which makes psi_k(-z, b) = psi_k(z, -b) exactly.
inline double alpha_value(const CriticalIndices& ci, CRule rule, std::size_t k) {
  const double sgn = ci.z < 0.0 ? -1.0 : 1.0;
  if (static_cast<long long>(k) >= ci.scalar_end()) return sgn;
  const double zk = std::abs(ci.z_k(k));
  const double ck = c_value(rule, k);
  if (zk * zk / 4.0 - 1.0 + ck < 0.0) {
    throw NumericError("alpha_sequence: negative discriminant at k = " + std::to_string(k) +
                       " (kappa too small for this c rule)");
  }
  return sgn * alpha_scalar_branch(zk, ck);
}

struct AlphaSequence {
  std::vector<double> values;  // values[k-1] = alpha_k

  [[nodiscard]] double at(std::size_t k) const { return values[k - 1]; }
  [[nodiscard]] std::size_t size() const { return values.size(); }
};

inline AlphaSequence alpha_sequence(const CriticalIndices& ci, CRule rule) {
  AlphaSequence seq;
  seq.values.resize(ci.n);
  for (std::size_t k = 1; k <= ci.n; ++k) seq.values[k - 1] = alpha_value(ci, rule, k);
  return seq;
}

inline constexpr std::size_t kDefaultOracleCap = 64;

/// phi_{-1} = 0, phi_0 = 1, phi_k = (z sqrt(n) - b_k) phi_{k-1} - a_{k-1}^2 phi_{k-2}
/// in long double; returns phi_0..phi_n, phi_n = det(z sqrt(n) I - J_n).
inline std::vector<long double> phi_exact(const JacobiMatrix& m, double z,
                                          std::size_t cap = kDefaultOracleCap) {
  if (m.n > cap) {
    throw OracleRangeError("phi_exact: n = " + std::to_string(m.n) + " exceeds oracle cap " +
                           std::to_string(cap));
  }
  std::vector<long double> phi(m.n + 1);
  const long double shift = static_cast<long double>(z) * std::sqrt(static_cast<long double>(m.n));
  phi[0] = 1.0L;
  long double prev = 0.0L;  // phi_{k-2}
  for (std::size_t k = 1; k <= m.n; ++k) {
    const long double a2 = k >= 2 ? static_cast<long double>(m.a[k - 2]) * m.a[k - 2] : 0.0L;
    phi[k] = (shift - static_cast<long double>(m.b[k - 1])) * phi[k - 1] - a2 * prev;
    prev = phi[k - 1];
  }
  return phi;
}

/// Per-(n, z, kappa, c) constants of the scaled recursion; shared by all
/// replicas of a Monte Carlo run.
struct RecursionPlan {
  CriticalIndices indices;
  CRule c_rule = CRule::Gbe;
  AlphaSequence alpha;
  std::vector<double> diag_scale;     // z_k / alpha_k
  std::vector<double> noise_scale;    // 1 / (alpha_k sqrt(k))
  std::vector<double> offdiag_scale;  // 1 / (sqrt(k(k-1)) alpha_k alpha_{k-1}), k >= 2
};

inline RecursionPlan make_plan(std::size_t n, double z, double kappa, CRule c_rule) {
  RecursionPlan plan;
  plan.indices = critical_indices(n, z, kappa);
  plan.c_rule = c_rule;
  plan.alpha = alpha_sequence(plan.indices, c_rule);
  plan.diag_scale.resize(n);
  plan.noise_scale.resize(n);
  plan.offdiag_scale.assign(n, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    const double ak = plan.alpha.at(k);
    plan.diag_scale[k - 1] = plan.indices.z_k(k) / ak;
    plan.noise_scale[k - 1] = 1.0 / (ak * std::sqrt(kd));
    if (k >= 2) plan.offdiag_scale[k - 1] = 1.0 / (std::sqrt(kd * (kd - 1.0)) * ak * plan.alpha.at(k - 1));
  }
  return plan;
}

/// Scaled state after step k: X_k = (psi_k, psi_{k-1}) = 2^exponent * (x, y).
/// Rescaling is by exact powers of two, so the representation carries no
/// rounding beyond that of the recursion itself.
struct ScaledState {
  double x = 1.0;
  double y = 0.0;
  std::int64_t exponent = 0;

  [[nodiscard]] double log_norm() const {
    return static_cast<double>(exponent) * std::numbers::ln2 + std::log(std::hypot(x, y));
  }
  [[nodiscard]] double log_abs_psi() const {
    return static_cast<double>(exponent) * std::numbers::ln2 + std::log(std::abs(x));
  }
  [[nodiscard]] double log_abs_psi_prev() const {
    return static_cast<double>(exponent) * std::numbers::ln2 + std::log(std::abs(y));
  }
};

namespace detail {

inline void renormalize(ScaledState& st) {
  constexpr double kHigh = 0x1.0p+64;
  constexpr double kLow = 0x1.0p-64;
  const double mx = std::max(std::abs(st.x), std::abs(st.y));
  if (mx > kHigh || (mx < kLow && mx > 0.0)) {
    int e = 0;
    std::frexp(mx, &e);
    st.x = std::ldexp(st.x, -e);
    st.y = std::ldexp(st.y, -e);
    st.exponent += e;
  }
}

}  // namespace detail

/// Runs the scaled recursion for k = 1..last_k (0 means n), calling
/// visit(k, state) after each step. This is the single stepping kernel used by
/// evolve() and by the Monte Carlo harness.
template <class Visitor>
void run_recursion(const RecursionPlan& plan, const JacobiMatrix& m, Visitor&& visit,
                   std::size_t last_k = 0, ScaledState start = {}) {
  const std::size_t n = plan.indices.n;
  if (m.n != n) throw ParameterError("run_recursion: matrix dimension does not match plan");
  if (last_k == 0 || last_k > n) last_k = n;
  // Default start is X_0 = (psi_0, psi_{-1}) = (1, 0).
  ScaledState st = start;
  for (std::size_t k = 1; k <= last_k; ++k) {
    const double p = plan.diag_scale[k - 1] - m.b[k - 1] * plan.noise_scale[k - 1];
    double next = p * st.x;
    if (k >= 2) {
      const double a = m.a[k - 2];
      next -= a * a * plan.offdiag_scale[k - 1] * st.y;
    }
    st.y = st.x;
    st.x = next;
    detail::renormalize(st);
    visit(k, static_cast<const ScaledState&>(st));
  }
}

/// Per-step record of the recursion. Storage is zero-based (index k-1).
struct RecursionTrace {
  CriticalIndices indices;
  std::vector<double> u1, u2;  // unit direction of X_k
  std::vector<double> s;       // log ||X_k||
  std::vector<std::int8_t> sign;
  std::vector<double> delta;   // psi_k / psi_{k-1} - 1; +inf when psi_{k-1} == 0
  std::vector<std::size_t> flagged;
  double log_abs_psi_n = 0.0;
  int sign_n = 1;

  [[nodiscard]] std::size_t length() const { return s.size(); }
  [[nodiscard]] bool covers(std::size_t k) const { return k >= 1 && k <= length(); }
  [[nodiscard]] double log_abs_psi(std::size_t k) const { return s[k - 1] + std::log(std::abs(u1[k - 1])); }
  [[nodiscard]] double delta_at(std::size_t k) const { return delta[k - 1]; }
  [[nodiscard]] Vec2 direction(std::size_t k) const { return {u1[k - 1], u2[k - 1]}; }
  [[nodiscard]] bool is_flagged(std::size_t k) const { return !std::isfinite(delta[k - 1]) || u1[k - 1] == 0.0; }
};

struct EvolveOptions {
  std::size_t last_k = 0;  // 0: run to n
  ScaledState start{};     // X_0; any multiple of (1, 0) leaves delta and u unchanged
};

inline RecursionTrace evolve(const RecursionPlan& plan, const JacobiMatrix& m, EvolveOptions opt = {}) {
  RecursionTrace tr;
  tr.indices = plan.indices;
  const std::size_t steps = (opt.last_k == 0 || opt.last_k > plan.indices.n) ? plan.indices.n : opt.last_k;
  tr.u1.reserve(steps);
  tr.u2.reserve(steps);
  tr.s.reserve(steps);
  tr.sign.reserve(steps);
  tr.delta.reserve(steps);
  ScaledState last;
  run_recursion(
      plan, m,
      [&](std::size_t k, const ScaledState& st) {
        const double nrm = std::hypot(st.x, st.y);
        tr.u1.push_back(st.x / nrm);
        tr.u2.push_back(st.y / nrm);
        tr.s.push_back(static_cast<double>(st.exponent) * std::numbers::ln2 + std::log(nrm));
        tr.sign.push_back(static_cast<std::int8_t>(st.x > 0.0 ? 1 : (st.x < 0.0 ? -1 : 0)));
        if (st.y != 0.0) {
          tr.delta.push_back(st.x / st.y - 1.0);
        } else {
          tr.delta.push_back(std::numeric_limits<double>::infinity());
        }
        if (st.y == 0.0 || st.x == 0.0) tr.flagged.push_back(k);
        last = st;
      },
      steps, opt.start);
  tr.log_abs_psi_n = last.log_abs_psi();
  tr.sign_n = last.x > 0.0 ? 1 : (last.x < 0.0 ? -1 : 0);
  return tr;
}

inline RecursionTrace evolve(const JacobiMatrix& m, double z, double kappa, CRule c_rule,
                             EvolveOptions opt = {}) {
  return evolve(make_plan(m.n, z, kappa, c_rule), m, opt);
}

/// log n!, by summation up to 1000 and log-gamma beyond.
inline double log_factorial(std::size_t n) {
  if (n > 1000) return std::lgamma(static_cast<double>(n) + 1.0);
  CompensatedSum acc;
  for (std::size_t i = 2; i <= n; ++i) acc += std::log(static_cast<double>(i));
  return acc.value();
}

/// log C_n(z) = (log n! - n log n) / 2 + sum_i log|alpha_i|.
inline double log_cn_exact(std::size_t n, double z, double kappa, CRule c_rule) {
  const CriticalIndices ci = critical_indices(n, z, kappa);
  CompensatedSum acc;
  acc += 0.5 * (log_factorial(n) - static_cast<double>(n) * std::log(static_cast<double>(n)));
  for (std::size_t k = 1; k <= n; ++k) acc += std::log(std::abs(alpha_value(ci, c_rule, k)));
  return acc.value();
}

/// (log n)/8 + n (z^2/4 - 1/2), the logarithmic potential of the semicircle
/// plus the log correction.
inline double log_cn_asymptotic(std::size_t n, double z) {
  check_z(z);
  const double nd = static_cast<double>(n);
  return std::log(nd) / 8.0 + nd * (z * z / 4.0 - 0.5);
}

/// w_n = (log|psi_n| + (log n)/6) / sqrt(v log n / 2).
inline double w_statistic(double log_abs_psi_n, std::size_t n, double v) {
  if (n < 2) throw ParameterError("w_statistic: n must be >= 2");
  if (!(v > 0.0)) throw ParameterError("w_statistic: v must be > 0");
  const double ln = std::log(static_cast<double>(n));
  return (log_abs_psi_n + ln / 6.0) / std::sqrt(v * ln / 2.0);
}

inline double w_statistic(const RecursionTrace& tr, double v) {
  if (tr.length() != tr.indices.n) throw ParameterError("w_statistic: trace incomplete");
  return w_statistic(tr.log_abs_psi_n, tr.indices.n, v);
}

struct TransferPair {
  Mat2 A;
  Mat2 W;
};

/// (A_k, W_k) with X_k = (A_k + W_k) X_{k-1}, 2 <= k <= n.
inline TransferPair transfer_matrices(const CriticalIndices& ci, CRule c_rule, const JacobiMatrix& m,
                                      std::size_t k) {
  if (k < 2 || k > ci.n || m.n != ci.n) throw ParameterError("transfer_matrices: k out of range");
  const double kd = static_cast<double>(k);
  const double ak = alpha_value(ci, c_rule, k);
  const double akm1 = alpha_value(ci, c_rule, k - 1);
  const double ck = c_value(c_rule, k);
  const double gk = g_from_matrix(m, c_rule, k);
  TransferPair tp;
  tp.A = {ci.z_k(k) / ak, -(1.0 - ck) / (ak * akm1), 1.0, 0.0};
  tp.W = {-m.b_at(k) / (ak * std::sqrt(kd)), -gk / (ak * akm1 * std::sqrt(kd)), 0.0, 0.0};
  return tp;
}

}  // namespace jclt
