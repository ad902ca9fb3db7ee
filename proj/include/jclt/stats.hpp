#pragma once

// Sturm counting, distributional tests, the Levy concentration function and the
// Monte Carlo harness for w_n(z).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jclt/charpoly.hpp"
#include "jclt/compensated.hpp"
#include "jclt/ensemble.hpp"
#include "jclt/error.hpp"
#include "jclt/oscillatory.hpp"
#include "jclt/parallel.hpp"
#include "jclt/rng.hpp"
#include "jclt/scalar_regime.hpp"

namespace jclt {

// ---------------------------------------------------------------- spectra

/// #{eigenvalues of J/sqrt(n) <= x}, from the pivots of x sqrt(n) I - J.
inline std::size_t sturm_count(const JacobiMatrix& m, double x) {
  const std::size_t n = m.n;
  if (n == 0) return 0;
  if (std::isnan(x)) throw ParameterError("sturm_count: x is NaN");
  if (x == std::numeric_limits<double>::infinity()) return n;
  if (x == -std::numeric_limits<double>::infinity()) return 0;
  const double sigma = x * std::sqrt(static_cast<double>(n));
  double scale = std::max(1.0, std::abs(sigma));
  for (double b : m.b) scale = std::max(scale, std::abs(b));
  for (double a : m.a) scale = std::max(scale, std::abs(a));
  const double pivmin = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

  std::size_t count = 0;
  double d = 1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    double next = sigma - m.b[k - 1];
    if (k >= 2) next -= m.a2_at(k - 1) / d;
    // A vanishing pivot is pushed to +pivmin: an eigenvalue at x counts as <= x.
    if (std::abs(next) < pivmin) next = next < 0.0 ? -pivmin : pivmin;
    d = next;
    if (d > 0.0) ++count;
  }
  return count;
}

inline double semicircle_cdf(double x) {
  if (std::isnan(x)) return x;
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * std::numbers::pi) + std::asin(x / 2.0) / std::numbers::pi;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct EsdReport {
  std::size_t n = 0;
  std::vector<double> grid;
  std::vector<std::size_t> counts;
  std::vector<double> empirical;  // counts / n
  std::vector<double> semicircle;
  double sup_distance = 0.0;
};

inline std::vector<double> default_esd_grid(std::size_t points = 101, double lo = -2.5, double hi = 2.5) {
  if (points < 2) throw ParameterError("esd grid needs at least 2 points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

inline EsdReport esd_report(const JacobiMatrix& m, std::vector<double> grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw ParameterError("esd_report: grid must be sorted");
  EsdReport r;
  r.n = m.n;
  r.grid = std::move(grid);
  for (double x : r.grid) {
    const std::size_t c = sturm_count(m, x);
    const double e = static_cast<double>(c) / static_cast<double>(m.n);
    const double f = semicircle_cdf(x);
    r.counts.push_back(c);
    r.empirical.push_back(e);
    r.semicircle.push_back(f);
    r.sup_distance = std::max(r.sup_distance, std::abs(e - f));
  }
  return r;
}

inline EsdReport esd_report(const EnsembleSpec& spec, std::size_t n, Seed seed, std::vector<double> grid) {
  return esd_report(sample(spec, n, seed), std::move(grid));
}

// ---------------------------------------------------------------- tests

/// P(K > lambda) for the Kolmogorov distribution.
inline double kolmogorov_pvalue(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form; the alternating series converges slowly here.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-300) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

inline KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ParameterError("ks_test: empty sample");
  std::sort(samples.begin(), samples.end());
  const double nd = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / nd - f, f - static_cast<double>(i) / nd});
  }
  return {d, kolmogorov_pvalue(std::sqrt(nd) * d)};
}

/// sup_x #{s : |s - x| <= eps} / N, exact: the optimal window can be taken
/// with its left end at a sample point.
inline double levy_q(std::vector<double> samples, double eps) {
  if (samples.empty()) throw ParameterError("levy_q: empty sample");
  if (!(eps > 0.0)) throw ParameterError("levy_q: eps must be > 0");
  std::sort(samples.begin(), samples.end());
  const double width = 2.0 * eps;
  std::size_t best = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    j = std::max(j, i);
    while (j + 1 < samples.size() && samples[j + 1] - samples[i] <= width) ++j;
    best = std::max(best, j - i + 1);
  }
  return static_cast<double>(best) / static_cast<double>(samples.size());
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;   // unbiased
  double skew = 0.0;
  double kurt = 0.0;  // excess
};

inline Moments moments(const std::vector<double>& x) {
  Moments m;
  if (x.empty()) return m;
  const double nd = static_cast<double>(x.size());
  CompensatedSum s1;
  for (double v : x) s1 += v;
  m.mean = s1.value() / nd;
  CompensatedSum s2, s3, s4;
  for (double v : x) {
    const double d = v - m.mean;
    s2 += d * d;
    s3 += d * d * d;
    s4 += d * d * d * d;
  }
  const double m2 = s2.value() / nd;
  m.var = x.size() > 1 ? s2.value() / (nd - 1.0) : 0.0;
  if (m2 > 0.0) {
    m.skew = (s3.value() / nd) / std::pow(m2, 1.5);
    m.kurt = (s4.value() / nd) / (m2 * m2) - 3.0;
  }
  return m;
}

inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw ParameterError("quantile: empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

inline double iqr(const std::vector<double>& x) { return quantile(x, 0.75) - quantile(x, 0.25); }

/// Least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("ols_slope: need >= 2 paired points");
  const Moments mx = moments(x);
  const Moments my = moments(y);
  CompensatedSum sxy, sxx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx.mean) * (y[i] - my.mean);
    sxx += (x[i] - mx.mean) * (x[i] - mx.mean);
  }
  if (sxx.value() == 0.0) throw NumericError("ols_slope: degenerate abscissae");
  return sxy.value() / sxx.value();
}

// ---------------------------------------------------------------- Monte Carlo

inline constexpr std::array<double, 4> kRatioTailEps{1e-1, 1e-2, 1e-3, 1e-4};

enum ReplicaFlag : std::uint32_t {
  kFlagZeroComponent = 1u,  // an exact zero appeared in X_k
  kFlagNonFinite = 2u,      // w or log|psi_n| not finite
};

struct DiagnosticsFlags {
  bool scalar = false;
  bool transition = false;
  bool blocks = false;
  [[nodiscard]] bool any() const { return scalar || transition || blocks; }
};

struct CltConfig {
  EnsembleSpec spec = EnsembleSpec::gbe(2.0);
  std::size_t n = 0;
  double z = 1.0;
  double kappa = 4.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double epsilon = 0.1;
  double tau = 1.0 / 3.0;
  DiagnosticsFlags diagnostics;
  unsigned threads = 0;  // not part of the report
  bool keep_replicas = true;
};

struct BlockIncrement {
  long long i = 0;
  double j = 0.0;
  double dlog_t = 0.0;  // log t_{i+1} - log t_i
};

struct ReplicaResult {
  std::size_t replica = 0;  // stream index, 1-based
  double w = 0.0;
  double log_psi_n = 0.0;
  double delta_end = 0.0;  // psi_n / psi_{n-1} - 1
  std::uint32_t flags = 0;

  std::optional<ScalarReport> scalar;
  std::optional<double> transition;
  bool blocks_ran = false;
  bool blocks_complete = false;
  long long i_star = 0;
  long long i0 = 0;
  std::vector<BlockIncrement> increments;
};

inline void validate(const CltConfig& c) {
  check_z(c.z);
  if (c.n < 2) throw ParameterError("n must be >= 2");
  if (c.samples < 2) throw ParameterError("samples must be >= 2");
  if (!(c.kappa > 0.0)) throw ParameterError("kappa must be > 0");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ParameterError("epsilon must lie in (0, 1)");
  if (!(c.tau > 0.25 && c.tau < 0.4)) throw ParameterError("tau must lie in (1/4, 2/5)");
}

namespace detail {

inline void block_diagnostics(const RecursionTrace& tr, CRule c_rule, double tau, ReplicaResult& r) {
  BlockTrace bt;
  try {
    bt = run_blocks(tr, c_rule, {tau});
  } catch (const std::runtime_error&) {
    return;
  }
  r.blocks_ran = true;
  r.blocks_complete = bt.complete;
  r.i_star = bt.i_star;
  r.i0 = bt.schedule.i0;
  for (std::size_t b = 0; b + 1 < bt.blocks.size(); ++b) {
    const BlockRecord& cur = bt.blocks[b];
    const BlockRecord& nxt = bt.blocks[b + 1];
    if (!nxt.advanced) break;
    if (cur.i > bt.schedule.t0) break;
    r.increments.push_back({cur.i, bt.schedule.j_at(cur.i), nxt.t_log - cur.t_log});
  }
}

}  // namespace detail

/// One replica with stream index `replica`. The plan is shared across replicas.
inline ReplicaResult run_replica(const CltConfig& c, const RecursionPlan& plan, std::size_t replica) {
  ReplicaResult r;
  r.replica = replica;
  const JacobiMatrix m = sample(c.spec, c.n, Seed{c.seed, replica});
  ScaledState last;
  bool zero = false;
  if (!c.diagnostics.any()) {
    run_recursion(plan, m, [&](std::size_t, const ScaledState& st) {
      if (st.x == 0.0) zero = true;
      last = st;
    });
  } else {
    const RecursionTrace tr = evolve(plan, m);
    zero = !tr.flagged.empty();
    const double nrm_log = tr.s.back();
    // Rebuild the final state from the trace; only ratios and log|psi_n| are used.
    last.x = tr.u1.back();
    last.y = tr.u2.back();
    last.exponent = 0;
    r.log_psi_n = nrm_log + std::log(std::abs(last.x));
    if (c.diagnostics.scalar) {
      try {
        r.scalar = scalar_report(m, tr, c.epsilon, c.spec.c_rule);
      } catch (const std::runtime_error&) {
      }
    }
    if (c.diagnostics.transition) {
      try {
        r.transition = transition_stat(tr);
      } catch (const std::runtime_error&) {
      }
    }
    if (c.diagnostics.blocks) detail::block_diagnostics(tr, c.spec.c_rule, c.tau, r);
  }
  if (!c.diagnostics.any()) r.log_psi_n = last.log_abs_psi();
  r.delta_end = last.y != 0.0 ? last.x / last.y - 1.0 : std::numeric_limits<double>::infinity();
  r.w = w_statistic(r.log_psi_n, c.n, c.spec.v);
  if (zero) r.flags |= kFlagZeroComponent;
  if (!std::isfinite(r.w) || !std::isfinite(r.log_psi_n)) r.flags |= kFlagNonFinite;
  return r;
}

/// All replicas r = 1..samples, stored in replica order.
inline std::vector<ReplicaResult> mc_replicas(const CltConfig& c) {
  validate(c);
  const RecursionPlan plan = make_plan(c.n, c.z, c.kappa, c.spec.c_rule);
  std::vector<ReplicaResult> out(c.samples);
  parallel_for(c.samples, resolve_threads(c.threads),
               [&](std::size_t i) { out[i] = run_replica(c, plan, i + 1); });
  return out;
}

struct NamedValue {
  std::string name;
  double value = 0.0;
};

struct DiagnosticSection {
  std::string name;
  std::vector<NamedValue> values;
};

struct CltReport {
  CltConfig config;
  std::size_t n_samples = 0;  // replicas included in the statistics
  std::size_t excluded = 0;
  Moments w;
  KsResult ks;
  std::vector<std::pair<double, double>> ratio_tail;  // (eps, P(|psi_n/psi_{n-1}| <= eps))
  std::vector<DiagnosticSection> diagnostics;
  std::vector<ReplicaResult> replicas;  // empty unless keep_replicas
};

/// Per-block variance of log t_{i+1}/t_i and its log-log slope against j_i,
/// over blocks first_block <= i <= last_block.
struct BlockVarianceFit {
  std::vector<long long> i;
  std::vector<double> mean_j;
  std::vector<double> var;
  std::vector<std::size_t> count;
  double slope = std::numeric_limits<double>::quiet_NaN();
  long long last_block = 0;
};

inline BlockVarianceFit block_variance_fit(const std::vector<ReplicaResult>& reps, long long first_block = 3,
                                           std::size_t min_count = 10) {
  BlockVarianceFit fit;
  std::vector<double> i0s;
  for (const auto& r : reps) {
    if (r.blocks_ran && r.flags == 0) i0s.push_back(static_cast<double>(r.i0));
  }
  if (i0s.empty()) return fit;
  fit.last_block = static_cast<long long>(std::floor(median(i0s) / 2.0));
  std::vector<double> xs, ys;
  for (long long i = first_block; i <= fit.last_block; ++i) {
    std::vector<double> vals;
    CompensatedSum jsum;
    for (const auto& r : reps) {
      if (r.flags != 0) continue;
      for (const auto& inc : r.increments) {
        if (inc.i == i) {
          vals.push_back(inc.dlog_t);
          jsum += inc.j;
        }
      }
    }
    if (vals.size() < min_count) continue;
    const double mj = jsum.value() / static_cast<double>(vals.size());
    const double var = moments(vals).var;
    fit.i.push_back(i);
    fit.mean_j.push_back(mj);
    fit.var.push_back(var);
    fit.count.push_back(vals.size());
    if (var > 0.0) {
      xs.push_back(std::log(mj));
      ys.push_back(std::log(var));
    }
  }
  if (xs.size() >= 2) {
    try {
      fit.slope = ols_slope(xs, ys);
    } catch (const NumericError&) {
    }
  }
  return fit;
}

inline CltReport summarize(const CltConfig& c, std::vector<ReplicaResult> reps) {
  CltReport rep;
  rep.config = c;
  std::vector<double> w;
  w.reserve(reps.size());
  for (const auto& r : reps) {
    if (r.flags != 0) {
      ++rep.excluded;
      continue;
    }
    w.push_back(r.w);
  }
  rep.n_samples = w.size();
  rep.w = moments(w);
  if (!w.empty()) rep.ks = ks_test(w, normal_cdf);
  for (double eps : kRatioTailEps) {
    std::size_t hits = 0;
    for (const auto& r : reps) {
      if (r.flags == 0 && std::abs(1.0 + r.delta_end) <= eps) ++hits;
    }
    rep.ratio_tail.emplace_back(eps, rep.n_samples ? static_cast<double>(hits) / static_cast<double>(rep.n_samples) : 0.0);
  }

  const double log_n = std::log(static_cast<double>(c.n));
  if (c.diagnostics.scalar) {
    std::vector<double> sdb, sDb, edge;
    std::size_t gap_small = 0;
    for (const auto& r : reps) {
      if (r.flags != 0 || !r.scalar || !r.scalar->valid) continue;
      sdb.push_back(r.scalar->sum_delta_bar);
      sDb.push_back(r.scalar->sum_Delta_bar);
      edge.push_back(r.scalar->edge_scaled);
      if (r.scalar->linearization_gap < 10.0) ++gap_small;
    }
    DiagnosticSection s{"scalar", {}};
    s.values.push_back({"count", static_cast<double>(sdb.size())});
    if (!sdb.empty()) {
      const Moments a = moments(sdb);
      const Moments b = moments(sDb);
      s.values.push_back({"mean_sum_delta_bar", a.mean});
      s.values.push_back({"var_sum_delta_bar", a.var});
      s.values.push_back({"var_ratio", a.var / (c.spec.v / 3.0 * log_n)});
      s.values.push_back({"mean_sum_Delta_bar", b.mean});
      s.values.push_back({"Delta_bar_offset", std::abs(b.mean + c.spec.v / 6.0 * log_n) / std::sqrt(log_n)});
      s.values.push_back({"median_edge_scaled", median(edge)});
      s.values.push_back({"fraction_gap_below_10", static_cast<double>(gap_small) / static_cast<double>(sdb.size())});
    }
    rep.diagnostics.push_back(std::move(s));
  }
  if (c.diagnostics.transition) {
    std::vector<double> t;
    for (const auto& r : reps) {
      if (r.flags == 0 && r.transition) t.push_back(*r.transition);
    }
    DiagnosticSection s{"transition", {}};
    s.values.push_back({"count", static_cast<double>(t.size())});
    if (!t.empty()) {
      s.values.push_back({"median", median(t)});
      s.values.push_back({"iqr", iqr(t)});
    }
    rep.diagnostics.push_back(std::move(s));
  }
  if (c.diagnostics.blocks) {
    std::size_t ran = 0, complete = 0;
    CompensatedSum istar;
    for (const auto& r : reps) {
      if (r.flags != 0 || !r.blocks_ran) continue;
      ++ran;
      if (r.blocks_complete) ++complete;
      istar += static_cast<double>(r.i_star);
    }
    const BlockVarianceFit fit = block_variance_fit(reps);
    DiagnosticSection s{"blocks", {}};
    s.values.push_back({"count", static_cast<double>(ran)});
    if (ran > 0) {
      s.values.push_back({"fraction_complete", static_cast<double>(complete) / static_cast<double>(ran)});
      s.values.push_back({"mean_i_star", istar.value() / static_cast<double>(ran)});
    }
    s.values.push_back({"fit_blocks", static_cast<double>(fit.i.size())});
    s.values.push_back({"variance_slope", fit.slope});
    rep.diagnostics.push_back(std::move(s));
  }
  if (c.keep_replicas) rep.replicas = std::move(reps);
  return rep;
}

inline CltReport mc_clt(const CltConfig& c) { return summarize(c, mc_replicas(c)); }

}  // namespace jclt
