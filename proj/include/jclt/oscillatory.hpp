#pragma once

// Oscillatory-regime machinery for indices k = k0 + l. There A_{k0+l} has
// complex eigenvalues rho_l exp(+-i theta_l); in the basis Q_l it acts as rho_l
// times a rotation by theta_l. Blocks of indices are cut at stopping times where
// the accumulated rotation is close to a multiple of 2 pi.
//
// Orientation: with Q_l = [[w/2, -sqrt(4-w^2)/2], [1, 0]], Q_l^{-1} A Q_l is the
// counterclockwise rotation by theta_l (for rho = 1). Block vectors y_i are
// reported in the reflected frame y = diag(1, -1) Y where the per-step rotation
// is clockwise; the stopping rule |delta + delta^2 eps / 2 - eps| <= 6 sqrt(l/k0)
// is stated for that orientation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "jclt/charpoly.hpp"
#include "jclt/compensated.hpp"
#include "jclt/ensemble.hpp"
#include "jclt/error.hpp"
#include "jclt/mat2.hpp"

namespace jclt {

struct RotationData {
  double rho = 1.0;    // sqrt(1 - c_{k0+l})
  double theta = 0.0;  // arccos(w / 2), in [0, pi]
  double w = 2.0;      // |z_{k0+l}| / rho
};

inline RotationData rotation(const CriticalIndices& ci, CRule c_rule, std::size_t l) {
  if (l < 1 || ci.k0 + l > ci.n) {
    throw DomainError("rotation: l = " + std::to_string(l) + " outside [1, n - k0]");
  }
  RotationData r;
  r.rho = std::sqrt(1.0 - c_value(c_rule, ci.k0 + l));
  r.w = std::abs(ci.z_k(ci.k0 + l)) / r.rho;
  if (r.w > 2.0) throw DomainError("rotation: |w_l| > 2 at l = " + std::to_string(l) + " (not oscillatory)");
  r.theta = std::acos(r.w / 2.0);
  return r;
}

struct QBasis {
  Mat2 q;
  Mat2 q_inv;
};

inline QBasis q_basis(double w) {
  if (!(std::abs(w) < 2.0)) throw DomainError("q_basis: singular basis, |w| must be < 2");
  const double root = std::sqrt(4.0 - w * w);
  QBasis qb;
  qb.q = {w / 2.0, -root / 2.0, 1.0, 0.0};
  qb.q_inv = {0.0, 1.0, -2.0 / root, w / root};
  return qb;
}

/// Y_l as a unit direction and a log-norm.
struct BasisVector {
  Vec2 direction;
  double log_norm = 0.0;
};

namespace detail {

inline void require_scalar_end(const RecursionTrace& tr) {
  const long long kb = tr.indices.scalar_end();
  if (kb < 1 || !tr.covers(static_cast<std::size_t>(kb))) {
    throw DiagnosticUnavailable("trace does not cover k0 - l0 >= 1");
  }
  if (tr.u1[static_cast<std::size_t>(kb) - 1] == 0.0) {
    throw DiagnosticUnavailable("psi_{k0-l0} is zero (flagged index)");
  }
}

}  // namespace detail

/// Y_l = (r_l / psi_{k0-l0}) Q_l^{-1} X_{k0+l}, r_l = prod_{j=l0+1}^{l} 1/rho_j.
inline BasisVector change_basis(const RecursionTrace& tr, std::size_t l, CRule c_rule) {
  const CriticalIndices& ci = tr.indices;
  if (l < ci.l0) throw ParameterError("change_basis: l must be >= l0");
  if (!tr.covers(ci.k0 + l)) throw ParameterError("change_basis: trace does not cover k0 + l");
  detail::require_scalar_end(tr);
  const auto kb = static_cast<std::size_t>(ci.scalar_end());

  CompensatedSum log_r;
  for (std::size_t j = ci.l0 + 1; j <= l; ++j) log_r += -0.5 * std::log(1.0 - c_value(c_rule, ci.k0 + j));

  const QBasis qb = q_basis(rotation(ci, c_rule, l).w);
  const Vec2 mapped = qb.q_inv * tr.direction(ci.k0 + l);
  const double mapped_norm = mapped.norm();
  const double psi_sign = tr.u1[kb - 1] > 0.0 ? 1.0 : -1.0;

  BasisVector out;
  out.direction = {psi_sign * mapped.x / mapped_norm, psi_sign * mapped.y / mapped_norm};
  out.log_norm = log_r.value() - tr.log_abs_psi(kb) + tr.s[ci.k0 + l - 1] + std::log(mapped_norm);
  return out;
}

struct AngleSum {
  double sum = 0.0;
  double residue = 0.0;  // sum reduced to (-pi, pi]
};

inline double reduce_angle(double angle) {
  double r = std::remainder(angle, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// alpha_{l,l'} = sum_{j=l+1}^{l'} theta_j, compensated.
inline AngleSum angle_sum(const CriticalIndices& ci, CRule c_rule, std::size_t l, std::size_t lp) {
  if (lp < l) throw ParameterError("angle_sum: requires l <= l'");
  CompensatedSum acc;
  for (std::size_t j = l + 1; j <= lp; ++j) acc += rotation(ci, c_rule, j).theta;
  return {acc.value(), reduce_angle(acc.value())};
}

struct BlockSchedule {
  std::size_t k0 = 0;
  double kappa = 0.0;
  double tau = 0.0;
  double nu = 0.0;
  long long i0 = 0;
  long long i1 = 0;
  long long j0 = 0;
  long long t0 = 0;
  std::vector<long long> l_hat;  // l_hat[i-1], 1 <= i <= t0
  std::vector<double> j;         // j[i-1]
  long long n_kappa = 0;         // l_hat_{t0}

  [[nodiscard]] long long l_hat_at(long long i) const { return l_hat[static_cast<std::size_t>(i - 1)]; }
  [[nodiscard]] double j_at(long long i) const { return j[static_cast<std::size_t>(i - 1)]; }
  /// l_hat_{i+1} - l_hat_i, 1 <= i < t0.
  [[nodiscard]] long long delta_l_hat(long long i) const { return l_hat_at(i + 1) - l_hat_at(i); }
};

inline BlockSchedule block_schedule(std::size_t k0, double kappa, double tau, double nu) {
  if (!(tau > 0.25 && tau < 0.4)) throw ParameterError("block_schedule: tau must lie in (1/4, 2/5)");
  if (!(kappa > 0.0)) throw ParameterError("block_schedule: kappa must be > 0");
  if (!(nu >= kappa && nu <= 2.0 * kappa)) throw ParameterError("block_schedule: nu must lie in [kappa, 2 kappa]");
  const double k0d = static_cast<double>(k0);
  BlockSchedule s;
  s.k0 = k0;
  s.kappa = kappa;
  s.tau = tau;
  s.nu = nu;
  const double nu32 = std::pow(nu, 1.5);
  s.i0 = integer_floor(std::pow(k0d, tau)) - static_cast<long long>(std::ceil(nu32 - 1e-12 * nu32));
  s.i1 = integer_floor(std::pow(k0d, (1.0 - tau) / 3.0));
  s.j0 = s.i1 - static_cast<long long>(std::ceil(std::sqrt(kappa) - 1e-12));
  if (s.i0 < 1) throw ScheduleError("block_schedule: i0 = floor(k0^tau) - ceil(nu^{3/2}) < 1");
  if (s.j0 < 1) throw ScheduleError("block_schedule: j0 = i1 - ceil(sqrt(kappa)) < 1");
  s.t0 = s.i0 + s.j0;
  s.l_hat.resize(static_cast<std::size_t>(s.t0));
  s.j.resize(static_cast<std::size_t>(s.t0));
  const double cbrt_k0 = std::cbrt(k0d);
  for (long long i = 1; i <= s.t0; ++i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    if (i <= s.i0) {
      const double ji = static_cast<double>(i - 1) + nu32;
      s.j[idx] = ji;
      s.l_hat[idx] = integer_floor(cbrt_k0 * std::pow(ji, 2.0 / 3.0));
    } else {
      const long long d = s.i0 + s.i1 - i;
      s.j[idx] = static_cast<double>(d);
      s.l_hat[idx] = integer_floor(k0d / static_cast<double>(d * d));
    }
  }
  s.n_kappa = s.l_hat.back();
  return s;
}

struct BlockRecord {
  long long i = 0;
  std::size_t l = 0;
  double t_log = 0.0;           // log|t_i|
  double eps = 0.0;
  double delta_residue = 0.0;   // delta_{l_{i-1}, l_i}; for i = 1 the residue of alpha_{l0, l1}
  bool advanced = true;
};

struct BlockOptions {
  double tau = 1.0 / 3.0;
};

struct BlockTrace {
  BlockSchedule schedule;
  std::vector<BlockRecord> blocks;  // i = 1..i*, then one non-advanced row if halted by rule
  long long i_star = 0;
  double nu = 0.0;
  double log_norm_y_l0 = 0.0;
  bool complete = false;
  bool nu_clamped = false;
  bool wlog_failed = false;     // argument of y_{l0} below 2 sqrt(l0/k0)
  std::size_t beyond_validity = 0;  // blocks whose l_{i+1} exceeds k0 / kappa
  std::size_t sandwich_violations = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// y = diag(1, -1) Y normalized by ||Y_{l0}||, as (log|t|, eps).
struct BlockVector {
  double t_log = 0.0;
  double eps = 0.0;
};

inline BlockVector block_vector(const RecursionTrace& tr, std::size_t l, CRule c_rule, double log_norm_l0) {
  const BasisVector y = change_basis(tr, l, c_rule);
  const double x1 = y.direction.x;
  const double x2 = -y.direction.y;
  return {y.log_norm - log_norm_l0 + std::log(std::abs(x1)), x2 / x1};
}

}  // namespace detail

/// Stopping-time blocks l_1 < l_2 < ... along the oscillatory regime of one
/// trace; block vectors are read off the sampled trajectory itself.
inline BlockTrace run_blocks(const RecursionTrace& tr, CRule c_rule, BlockOptions opt = {}) {
  const CriticalIndices& ci = tr.indices;
  BlockTrace bt;
  const std::size_t l0 = ci.l0;
  if (ci.k0 + l0 + 1 > tr.length()) throw DiagnosticUnavailable("run_blocks: oscillatory regime not covered");
  const std::size_t l_max = tr.length() - ci.k0;
  const double k0d = static_cast<double>(ci.k0);
  const double validity = k0d / ci.kappa;

  const BasisVector y0 = change_basis(tr, l0, c_rule);
  bt.log_norm_y_l0 = y0.log_norm;
  // Reflected frame: y = (Y1, -Y2).
  const double phi0 = std::atan2(-y0.direction.y, y0.direction.x);
  const double threshold0 = 2.0 * std::sqrt(static_cast<double>(l0) / k0d);
  {
    double arg = phi0 < 0.0 ? phi0 + 2.0 * std::numbers::pi : phi0;
    bt.wlog_failed = !(arg > threshold0);
  }

  // l_1: first l >= l0 where the clockwise rotation of y_{l0} by alpha_{l0,l}
  // is within threshold0 of the first axis.
  std::size_t l1 = 0;
  CompensatedSum alpha;
  for (std::size_t l = l0;; ++l) {
    if (l > l0) alpha += rotation(ci, c_rule, l).theta;
    if (std::abs(std::sin(phi0 - alpha.value())) <= threshold0) {
      l1 = l;
      break;
    }
    if (l >= l_max) {
      bt.warnings.push_back("l_1 search exhausted the trace");
      return bt;
    }
  }

  bt.nu = static_cast<double>(l1) / std::cbrt(k0d);
  if (bt.nu < ci.kappa || bt.nu > 2.0 * ci.kappa) {
    bt.nu_clamped = true;
    bt.warnings.push_back("nu = " + std::to_string(bt.nu) + " clamped to [kappa, 2 kappa]");
    bt.nu = std::clamp(bt.nu, ci.kappa, 2.0 * ci.kappa);
  }
  try {
    bt.schedule = block_schedule(ci.k0, ci.kappa, opt.tau, bt.nu);
  } catch (const ScheduleError& e) {
    bt.warnings.push_back(e.what());
    return bt;
  }
  const BlockSchedule& sch = bt.schedule;

  detail::BlockVector yv = detail::block_vector(tr, l1, c_rule, y0.log_norm);
  bt.blocks.push_back({1, l1, yv.t_log, yv.eps, reduce_angle(alpha.value()), true});
  bt.i_star = 1;

  std::size_t li = l1;
  for (long long i = 1;; ++i) {
    const bool halt = static_cast<long long>(li) >= sch.n_kappa || std::abs(yv.eps) > 0.5 || i >= sch.t0;
    if (halt) {
      bt.blocks.push_back({i + 1, li, yv.t_log, yv.eps, 0.0, false});
      bt.complete = true;
      return bt;
    }
    const auto min_step = static_cast<std::size_t>(std::max<long long>(sch.delta_l_hat(i), 0));
    const double tol = 6.0 * std::sqrt(static_cast<double>(li) / k0d);
    CompensatedSum block_angle;
    std::size_t next = 0;
    double residue = 0.0;
    for (std::size_t l = li + 1; l <= l_max; ++l) {
      block_angle += rotation(ci, c_rule, l).theta;
      if (l < li + min_step) continue;
      const double d = reduce_angle(block_angle.value());
      if (std::abs(d + d * d * yv.eps / 2.0 - yv.eps) <= tol) {
        next = l;
        residue = d;
        break;
      }
    }
    if (min_step == 0) {
      // Degenerate schedule step: l = l_i itself is admissible when the
      // (empty) residue already satisfies the rule.
      if (std::abs(yv.eps) <= tol && next != 0) next = std::min(next, li);
    }
    if (next == 0) {
      bt.warnings.push_back("stopping-time search exhausted the trace at block " + std::to_string(i));
      return bt;
    }
    if (static_cast<double>(next) > validity) ++bt.beyond_validity;
    const long long excess = static_cast<long long>(next - li) - static_cast<long long>(min_step);
    const auto bound = integer_floor(10.0 * std::numbers::pi * std::sqrt(k0d / static_cast<double>(li)));
    if (excess < 0 || excess > bound) ++bt.sandwich_violations;

    li = next;
    yv = detail::block_vector(tr, li, c_rule, y0.log_norm);
    bt.blocks.push_back({i + 1, li, yv.t_log, yv.eps, residue, true});
    bt.i_star = i + 1;
  }
}

/// log|psi_{k0+l0}| - log|psi_{k0-l0}|.
inline double transition_stat(const RecursionTrace& tr) {
  const CriticalIndices& ci = tr.indices;
  detail::require_scalar_end(tr);
  const std::size_t hi = ci.k0 + ci.l0;
  if (!tr.covers(hi)) throw DiagnosticUnavailable("transition_stat: trace does not cover k0 + l0");
  if (tr.u1[hi - 1] == 0.0) throw DiagnosticUnavailable("transition_stat: psi_{k0+l0} is zero");
  return tr.log_abs_psi(hi) - tr.log_abs_psi(static_cast<std::size_t>(ci.scalar_end()));
}

}  // namespace jclt
