#pragma once

// Random Jacobi coefficient sequences: the Gaussian beta ensemble in its
// tridiagonal (chi / Gaussian) realization, and general ensembles whose
// off-diagonal is parameterised as
//   a_{k-1}^2 / sqrt(k(k-1)) = 1 - c_k + g_k / sqrt(k).

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "jclt/error.hpp"
#include "jclt/rng.hpp"

namespace jclt {

enum class EnsembleKind { Gbe, General };

/// Centered noise laws, each scaled to variance v. `Zero` is the point mass
/// used for deterministic-limit checks.
enum class NoiseLaw { Gaussian, Uniform, Laplace, Zero };

/// Rule producing the deterministic centering sequence c_k.
enum class CRule { Gbe, Zero };

/// c_k = 1 - sqrt((k-1)/k): the centering that makes
/// g_k = (a_{k-1}^2 - (k-1)) / sqrt(k-1) exactly centered for the GbE.
inline double gbe_ck(std::size_t k) {
  if (k == 0) throw ParameterError("gbe_ck: k must be >= 1");
  const double inv = 1.0 / static_cast<double>(k);
  // 1 - sqrt(1 - x) = x / (1 + sqrt(1 - x)), no cancellation for large k.
  return inv / (1.0 + std::sqrt(1.0 - inv));
}

inline double c_value(CRule rule, std::size_t k) {
  switch (rule) {
    case CRule::Gbe:
      return gbe_ck(k);
    case CRule::Zero:
      return 0.0;
  }
  return 0.0;
}

inline std::string_view to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::Gaussian:
      return "gaussian";
    case NoiseLaw::Uniform:
      return "uniform";
    case NoiseLaw::Laplace:
      return "laplace";
    case NoiseLaw::Zero:
      return "zero";
  }
  return "?";
}

inline std::string_view to_string(CRule rule) { return rule == CRule::Gbe ? "gbe" : "zero"; }

inline NoiseLaw parse_noise_law(std::string_view name) {
  if (name == "gaussian") return NoiseLaw::Gaussian;
  if (name == "uniform") return NoiseLaw::Uniform;
  if (name == "laplace") return NoiseLaw::Laplace;
  if (name == "zero") return NoiseLaw::Zero;
  throw ParameterError("unsupported noise law '" + std::string(name) +
                       "' (palette: gaussian, uniform, laplace, zero)");
}

inline CRule parse_c_rule(std::string_view name) {
  if (name == "gbe") return CRule::Gbe;
  if (name == "zero") return CRule::Zero;
  throw ParameterError("unsupported c rule '" + std::string(name) + "' (gbe, zero)");
}

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::Gbe;
  double beta = 2.0;  // GbE only
  double v = 1.0;     // 2 / beta for the GbE
  NoiseLaw b_law = NoiseLaw::Gaussian;
  NoiseLaw g_law = NoiseLaw::Gaussian;
  CRule c_rule = CRule::Gbe;

  static EnsembleSpec gbe(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be > 0");
    EnsembleSpec s;
    s.kind = EnsembleKind::Gbe;
    s.beta = beta;
    s.v = 2.0 / beta;
    return s;
  }

  static EnsembleSpec general(double v, NoiseLaw b_law, NoiseLaw g_law, CRule c_rule) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError("v must be > 0");
    EnsembleSpec s;
    s.kind = EnsembleKind::General;
    s.beta = 2.0 / v;
    s.v = v;
    s.b_law = b_law;
    s.g_law = g_law;
    s.c_rule = c_rule;
    return s;
  }

  [[nodiscard]] double c(std::size_t k) const { return c_value(c_rule, k); }
};

/// Tridiagonal matrix with diagonal b_1..b_n and off-diagonal a_1..a_{n-1}.
/// b_1 is the bottom-right entry, so the order-k principal minor in the
/// characteristic polynomial recursion is the bottom-right k x k block.
/// Storage is zero-based: b[k-1] = b_k, a[k-1] = a_k.
struct JacobiMatrix {
  std::size_t n = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::size_t rejections = 0;  // g_k redraws in sample_general

  [[nodiscard]] double b_at(std::size_t k) const { return b[k - 1]; }
  [[nodiscard]] double a_at(std::size_t k) const { return a[k - 1]; }
  [[nodiscard]] double a2_at(std::size_t k) const { return a[k - 1] * a[k - 1]; }
};

/// g_k recovered from the realized off-diagonal, k >= 2.
inline double g_from_matrix(const JacobiMatrix& m, CRule rule, std::size_t k) {
  const double kd = static_cast<double>(k);
  const double ratio = m.a2_at(k - 1) / std::sqrt(kd * (kd - 1.0));
  return std::sqrt(kd) * (ratio - 1.0 + c_value(rule, k));
}

namespace detail {

inline double draw(NoiseLaw law, double v, Rng& rng, std::normal_distribution<double>& normal) {
  switch (law) {
    case NoiseLaw::Gaussian:
      return std::sqrt(v) * normal(rng);
    case NoiseLaw::Uniform: {
      const double half_width = std::sqrt(3.0 * v);
      return half_width * (2.0 * rng.uniform01() - 1.0);
    }
    case NoiseLaw::Laplace: {
      const double scale = std::sqrt(v / 2.0);
      const double u = rng.uniform01() - 0.5;
      const double mag = -std::log1p(-2.0 * std::abs(u));
      return u < 0.0 ? -scale * mag : scale * mag;
    }
    case NoiseLaw::Zero:
      return 0.0;
  }
  return 0.0;
}

}  // namespace detail

/// Dumitriu-Edelman tridiagonal GbE: b_i ~ N(0, 2/beta) and
/// sqrt(beta) a_i ~ chi_{i beta}, drawn as sqrt(Gamma(i beta / 2, 2)).
/// Coefficients are drawn in index order (b_k, then a_{k-1}) from the stream,
/// so the first m coefficients do not depend on n.
inline JacobiMatrix sample_gbe(std::size_t n, double beta, Seed seed) {
  if (n < 1) throw ParameterError("sample_gbe: n must be >= 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("sample_gbe: beta must be > 0");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::gamma_distribution<double> gamma;
  const double sd = std::sqrt(2.0 / beta);

  JacobiMatrix m;
  m.n = n;
  m.b.resize(n);
  m.a.resize(n - 1);
  for (std::size_t k = 1; k <= n; ++k) {
    m.b[k - 1] = sd * normal(rng);
    if (k >= 2) {
      const double dof = static_cast<double>(k - 1) * beta;
      const double chi2 = gamma(rng, std::gamma_distribution<double>::param_type(dof / 2.0, 2.0));
      m.a[k - 2] = std::sqrt(chi2 / beta);
    }
  }
  return m;
}

/// General ensemble. A negative radicand for a_{k-1}^2 triggers a redraw of
/// g_k; more than 1% redraws over the sequence is a degenerate spec.
inline JacobiMatrix sample_general(std::size_t n, const EnsembleSpec& spec, Seed seed) {
  if (spec.kind != EnsembleKind::General) throw ParameterError("sample_general: spec.kind must be general");
  if (n < 2) throw ParameterError("sample_general: n must be >= 2");
  Rng rng(seed);
  std::normal_distribution<double> normal;

  JacobiMatrix m;
  m.n = n;
  m.b.resize(n);
  m.a.resize(n - 1);
  constexpr std::size_t kMaxRedrawsPerIndex = 10000;
  for (std::size_t k = 1; k <= n; ++k) {
    m.b[k - 1] = detail::draw(spec.b_law, spec.v, rng, normal);
    if (k < 2) continue;
    const double kd = static_cast<double>(k);
    const double scale = std::sqrt(kd * (kd - 1.0));
    const double ck = spec.c(k);
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt >= kMaxRedrawsPerIndex) throw NumericError("sample_general: cannot realize a positive radicand");
      const double g = detail::draw(spec.g_law, spec.v, rng, normal);
      const double radicand = scale * (1.0 - ck + g / std::sqrt(kd));
      if (radicand >= 0.0) {
        m.a[k - 2] = std::sqrt(radicand);
        break;
      }
      ++m.rejections;
    }
  }
  if (static_cast<double>(m.rejections) > 0.01 * static_cast<double>(n - 1)) {
    throw ParameterError("sample_general: degenerate spec, rejection rate " +
                         std::to_string(static_cast<double>(m.rejections) / static_cast<double>(n - 1)) +
                         " exceeds 1%");
  }
  return m;
}

inline JacobiMatrix sample(const EnsembleSpec& spec, std::size_t n, Seed seed) {
  return spec.kind == EnsembleKind::Gbe ? sample_gbe(n, spec.beta, seed) : sample_general(n, spec, seed);
}

}  // namespace jclt
