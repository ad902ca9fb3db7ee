#pragma once

// Linearization of the ratio recursion in the scalar regime k <= k0 - l0.
// With psi_k = (1 + delta_k) psi_{k-1}:
//   delta_k = u_k + v_k delta_{k-1} / (1 + delta_{k-1}),
// linearized as delta_bar_k = u_k + v_k delta_bar_{k-1}, and the second-order
// correction Delta_bar_k = -v_k delta_bar_{k-1}^2 + v_k Delta_bar_{k-1}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "jclt/charpoly.hpp"
#include "jclt/compensated.hpp"
#include "jclt/ensemble.hpp"
#include "jclt/error.hpp"

namespace jclt {

/// (u_k, v_k) for 2 <= k <= last_k = k0 - l0. Zero-based storage at k - 2.
struct ScalarCoefficients {
  std::size_t last_k = 0;
  std::vector<double> u;
  std::vector<double> v;
  std::string warning;

  [[nodiscard]] bool empty() const { return u.empty(); }
  [[nodiscard]] double u_at(std::size_t k) const { return u[k - 2]; }
  [[nodiscard]] double v_at(std::size_t k) const { return v[k - 2]; }
};

inline ScalarCoefficients scalar_coefficients(const JacobiMatrix& m, const CriticalIndices& ci, CRule c_rule) {
  ScalarCoefficients sc;
  if (ci.scalar_end() < 2) {
    sc.warning = "scalar regime absent: k0 - l0 < 2";
    return sc;
  }
  sc.last_k = static_cast<std::size_t>(ci.scalar_end());
  sc.u.resize(sc.last_k - 1);
  sc.v.resize(sc.last_k - 1);
  double alpha_prev = alpha_value(ci, c_rule, 1);
  for (std::size_t k = 2; k <= sc.last_k; ++k) {
    const double kd = static_cast<double>(k);
    const double sqrt_k = std::sqrt(kd);
    const double ak = alpha_value(ci, c_rule, k);
    const double ck = c_value(c_rule, k);
    const double gk = g_from_matrix(m, c_rule, k);
    const double vk = (1.0 - ck + gk / sqrt_k) / (ak * alpha_prev);
    sc.v[k - 2] = vk;
    sc.u[k - 2] = ci.z_k(k) / ak - 1.0 - vk - m.b_at(k) / (ak * sqrt_k);
    alpha_prev = ak;
  }
  return sc;
}

/// delta_bar_1 = delta_1, delta_bar_k = u_k + v_k delta_bar_{k-1}. Zero-based at k - 1.
inline std::vector<double> linearized_delta(const ScalarCoefficients& sc, double delta1) {
  std::vector<double> out;
  out.reserve(sc.u.size() + 1);
  out.push_back(delta1);
  for (std::size_t i = 0; i < sc.u.size(); ++i) out.push_back(sc.u[i] + sc.v[i] * out.back());
  return out;
}

/// Delta_bar_1 = 0, Delta_bar_k = -v_k delta_bar_{k-1}^2 + v_k Delta_bar_{k-1}.
inline std::vector<double> linearized_Delta(const ScalarCoefficients& sc, const std::vector<double>& delta_bar) {
  if (delta_bar.size() != sc.u.size() + 1) throw ParameterError("linearized_Delta: length mismatch");
  std::vector<double> out;
  out.reserve(delta_bar.size());
  out.push_back(0.0);
  for (std::size_t i = 0; i < sc.v.size(); ++i) {
    const double db = delta_bar[i];
    out.push_back(sc.v[i] * (out.back() - db * db));
  }
  return out;
}

/// W_j = sum_{k=j}^{k0-l0} prod_{l=j+1}^{k} v_l for j in [first_j, k0 - l0],
/// from the backward pass W_j = 1 + v_{j+1} W_{j+1}. Zero-based at j - first_j.
inline std::vector<double> w_coefficients(const ScalarCoefficients& sc, std::size_t first_j) {
  if (sc.empty() || first_j < 1 || first_j > sc.last_k) throw ParameterError("w_coefficients: j out of range");
  std::vector<double> w(sc.last_k - first_j + 1);
  w.back() = 1.0;
  for (std::size_t j = sc.last_k; j-- > first_j;) w[j - first_j] = 1.0 + sc.v_at(j + 1) * w[j + 1 - first_j];
  return w;
}

struct ScalarReport {
  bool valid = false;
  std::string warning;
  std::size_t range_begin = 0;  // ceil((1 - eps) k0)
  std::size_t range_end = 0;    // k0 - l0
  double sum_delta_bar = 0.0;
  double sum_Delta_bar = 0.0;
  double sum_delta = 0.0;
  double edge_scaled = 0.0;      // |delta_{k0-l0}| k0^{1/3}
  double max_abs_delta = 0.0;    // over 1 <= k <= k0 - l0
  double linearization_gap = 0.0;  // sum_{k <= k0-l0} |Delta_k - Delta_bar_k|, Delta_k = delta_k - delta_bar_k
};

struct ScalarSeries {
  ScalarCoefficients coefficients;
  std::vector<double> delta_bar;
  std::vector<double> Delta_bar;
};

inline ScalarSeries scalar_series(const JacobiMatrix& m, const RecursionTrace& tr, CRule c_rule) {
  ScalarSeries s;
  s.coefficients = scalar_coefficients(m, tr.indices, c_rule);
  if (s.coefficients.empty()) return s;
  if (!tr.covers(s.coefficients.last_k)) throw ParameterError("scalar_series: trace does not cover k0 - l0");
  s.delta_bar = linearized_delta(s.coefficients, tr.delta_at(1));
  s.Delta_bar = linearized_Delta(s.coefficients, s.delta_bar);
  return s;
}

inline ScalarReport scalar_report(const JacobiMatrix& m, const RecursionTrace& tr, double epsilon, CRule c_rule) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParameterError("scalar_report: epsilon must lie in (0, 1)");
  ScalarReport rep;
  const CriticalIndices& ci = tr.indices;
  const auto begin = static_cast<long long>(std::ceil((1.0 - epsilon) * static_cast<double>(ci.k0)));
  if (begin <= 1 || ci.scalar_end() < std::max<long long>(begin, 2)) {
    rep.warning = "degenerate scalar range";
    return rep;
  }
  const ScalarSeries s = scalar_series(m, tr, c_rule);
  rep.range_begin = static_cast<std::size_t>(begin);
  rep.range_end = static_cast<std::size_t>(ci.scalar_end());

  CompensatedSum sum_db, sum_Db, sum_d, gap;
  double max_abs = 0.0;
  bool flagged = false;
  for (std::size_t k = 1; k <= rep.range_end; ++k) {
    const double d = tr.delta_at(k);
    if (!std::isfinite(d)) {
      flagged = true;
      continue;
    }
    max_abs = std::max(max_abs, std::abs(d));
    gap += std::abs((d - s.delta_bar[k - 1]) - s.Delta_bar[k - 1]);
    if (k >= rep.range_begin) {
      sum_db += s.delta_bar[k - 1];
      sum_Db += s.Delta_bar[k - 1];
      sum_d += d;
    }
  }
  rep.sum_delta_bar = sum_db.value();
  rep.sum_Delta_bar = sum_Db.value();
  rep.sum_delta = sum_d.value();
  rep.max_abs_delta = max_abs;
  rep.linearization_gap = gap.value();
  rep.edge_scaled = std::abs(tr.delta_at(rep.range_end)) * std::cbrt(static_cast<double>(ci.k0));
  rep.valid = !flagged;
  if (flagged) rep.warning = "flagged indices skipped";
  return rep;
}

}  // namespace jclt
