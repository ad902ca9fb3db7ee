#pragma once

// JSON and CSV serialization. CSV files always carry a header row and use LF
// line endings; doubles are written in shortest round-trip form.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jclt/charpoly.hpp"
#include "jclt/ensemble.hpp"
#include "jclt/error.hpp"
#include "jclt/oscillatory.hpp"
#include "jclt/scalar_regime.hpp"
#include "jclt/stats.hpp"

namespace jclt {

using Json = nlohmann::ordered_json;

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Non-finite doubles become null in JSON.
inline Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

// ---------------------------------------------------------------- spec

inline Json to_json(const EnsembleSpec& s) {
  Json j;
  if (s.kind == EnsembleKind::Gbe) {
    j["kind"] = "gbe";
    j["beta"] = s.beta;
  } else {
    j["kind"] = "general";
    j["v"] = s.v;
    j["b_law"] = std::string(to_string(s.b_law));
    j["g_law"] = std::string(to_string(s.g_law));
    j["c"] = std::string(to_string(s.c_rule));
  }
  return j;
}

inline EnsembleSpec spec_from_json(const Json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gbe") return EnsembleSpec::gbe(j.at("beta").get<double>());
    if (kind == "general") {
      return EnsembleSpec::general(j.at("v").get<double>(), parse_noise_law(j.value("b_law", "gaussian")),
                                   parse_noise_law(j.value("g_law", "gaussian")), parse_c_rule(j.value("c", "gbe")));
    }
    throw ParameterError("unknown ensemble kind '" + kind + "' (gbe, general)");
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid ensemble spec: ") + e.what());
  }
}

inline EnsembleSpec spec_from_json_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("ensemble spec is not valid JSON: ") + e.what());
  }
  return spec_from_json(j);
}

// ---------------------------------------------------------------- CSV

inline void write_matrix_csv(std::ostream& os, const JacobiMatrix& m) {
  os << "k,b,a\n";
  for (std::size_t k = 1; k <= m.n; ++k) {
    os << k << ',' << format_double(m.b_at(k)) << ',';
    if (k < m.n) os << format_double(m.a_at(k));
    os << '\n';
  }
}

inline void write_trace_csv(std::ostream& os, const RecursionTrace& tr) {
  os << "k,u1,u2,s,sign,delta,regime\n";
  for (std::size_t k = 1; k <= tr.length(); ++k) {
    os << k << ',' << format_double(tr.u1[k - 1]) << ',' << format_double(tr.u2[k - 1]) << ','
       << format_double(tr.s[k - 1]) << ',' << static_cast<int>(tr.sign[k - 1]) << ','
       << format_double(tr.delta[k - 1]) << ',' << to_string(tr.indices.regime(k)) << '\n';
  }
}

inline void write_scalar_csv(std::ostream& os, const RecursionTrace& tr, const ScalarSeries& s) {
  os << "k,delta,delta_bar,Delta_bar\n";
  for (std::size_t i = 0; i < s.delta_bar.size(); ++i) {
    const std::size_t k = i + 1;
    os << k << ',' << format_double(tr.delta_at(k)) << ',' << format_double(s.delta_bar[i]) << ','
       << format_double(s.Delta_bar[i]) << '\n';
  }
}

inline void write_blocks_csv(std::ostream& os, const BlockTrace& bt) {
  os << "i,l_i,t_log,eps_i,delta_residue,advanced\n";
  for (const auto& b : bt.blocks) {
    os << b.i << ',' << b.l << ',' << format_double(b.t_log) << ',' << format_double(b.eps) << ','
       << format_double(b.delta_residue) << ',' << (b.advanced ? 1 : 0) << '\n';
  }
}

inline void write_schedule_csv(std::ostream& os, const BlockSchedule& s) {
  os << "i,l_hat,j\n";
  for (long long i = 1; i <= s.t0; ++i) {
    os << i << ',' << s.l_hat_at(i) << ',' << format_double(s.j_at(i)) << '\n';
  }
}

inline void write_replicas_csv(std::ostream& os, const std::vector<ReplicaResult>& reps) {
  os << "replica,w,log_psi_n,delta_end,flags\n";
  for (const auto& r : reps) {
    os << r.replica << ',' << format_double(r.w) << ',' << format_double(r.log_psi_n) << ','
       << format_double(r.delta_end) << ',' << r.flags << '\n';
  }
}

inline void write_esd_csv(std::ostream& os, const EsdReport& e) {
  os << "x,count,empirical,semicircle\n";
  for (std::size_t i = 0; i < e.grid.size(); ++i) {
    os << format_double(e.grid[i]) << ',' << e.counts[i] << ',' << format_double(e.empirical[i]) << ','
       << format_double(e.semicircle[i]) << '\n';
  }
}

// ---------------------------------------------------------------- JSON reports

inline Json to_json(const CltReport& r) {
  const CltConfig& c = r.config;
  Json j;
  Json cfg;
  cfg["spec"] = to_json(c.spec);
  cfg["n"] = c.n;
  cfg["z"] = c.z;
  cfg["kappa"] = c.kappa;
  cfg["N"] = c.samples;
  cfg["seed"] = c.seed;
  cfg["epsilon"] = c.epsilon;
  cfg["tau"] = c.tau;
  cfg["diagnostics"] = {{"scalar", c.diagnostics.scalar},
                        {"transition", c.diagnostics.transition},
                        {"blocks", c.diagnostics.blocks}};
  j["config"] = cfg;
  j["n_samples"] = r.n_samples;
  j["excluded"] = r.excluded;
  j["mean"] = json_number(r.w.mean);
  j["var"] = json_number(r.w.var);
  j["skew"] = json_number(r.w.skew);
  j["kurt"] = json_number(r.w.kurt);
  j["ks_d"] = json_number(r.ks.d);
  j["ks_p"] = json_number(r.ks.p);
  Json tail = Json::array();
  for (const auto& [eps, p] : r.ratio_tail) tail.push_back({{"eps", eps}, {"p", p}});
  j["ratio_tail"] = tail;
  Json diag = Json::object();
  for (const auto& sec : r.diagnostics) {
    Json s = Json::object();
    for (const auto& v : sec.values) s[v.name] = json_number(v.value);
    diag[sec.name] = s;
  }
  j["diagnostics"] = diag;
  return j;
}

inline Json to_json(const EsdReport& e) {
  Json j;
  j["n"] = e.n;
  j["sup_distance"] = e.sup_distance;
  j["grid"] = e.grid;
  j["counts"] = e.counts;
  j["empirical"] = e.empirical;
  j["semicircle"] = e.semicircle;
  return j;
}

inline Json to_json(const BlockSchedule& s) {
  Json j;
  j["k0"] = s.k0;
  j["kappa"] = s.kappa;
  j["tau"] = s.tau;
  j["nu"] = s.nu;
  j["i0"] = s.i0;
  j["i1"] = s.i1;
  j["j0"] = s.j0;
  j["t0"] = s.t0;
  j["n_kappa"] = s.n_kappa;
  j["l_hat"] = s.l_hat;
  j["j"] = s.j;
  return j;
}

inline Json to_json(const BlockTrace& bt) {
  Json j;
  j["i_star"] = bt.i_star;
  j["nu"] = bt.nu;
  j["nu_clamped"] = bt.nu_clamped;
  j["complete"] = bt.complete;
  j["wlog_failed"] = bt.wlog_failed;
  j["log_norm_y_l0"] = json_number(bt.log_norm_y_l0);
  j["beyond_validity"] = bt.beyond_validity;
  j["sandwich_violations"] = bt.sandwich_violations;
  j["warnings"] = bt.warnings;
  Json rows = Json::array();
  for (const auto& b : bt.blocks) {
    rows.push_back({{"i", b.i},
                    {"l_i", b.l},
                    {"t_log", json_number(b.t_log)},
                    {"eps_i", json_number(b.eps)},
                    {"delta_residue", json_number(b.delta_residue)},
                    {"advanced", b.advanced}});
  }
  j["blocks"] = rows;
  if (bt.schedule.t0 > 0) j["schedule"] = to_json(bt.schedule);
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Writes text to a file in binary mode so line endings stay LF.
inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

template <class Writer>
std::string to_csv_string(Writer&& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

}  // namespace jclt
