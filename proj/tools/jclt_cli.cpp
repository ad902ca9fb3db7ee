// jclt: command-line front end.
//   sample | trace | clt | esd | blocks | concentration
// Exit codes: 0 success, 2 invalid arguments, 3 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jclt/charpoly.hpp"
#include "jclt/ensemble.hpp"
#include "jclt/error.hpp"
#include "jclt/io.hpp"
#include "jclt/oscillatory.hpp"
#include "jclt/scalar_regime.hpp"
#include "jclt/stats.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::optional<double> beta;
  std::string ensemble;
  std::optional<std::size_t> n;
  std::optional<double> z;
  double kappa = 4.0;
  double tau = 1.0 / 3.0;
  std::optional<double> nu;
  double epsilon = 0.1;
  std::optional<std::size_t> samples;
  std::uint64_t seed = 0;
  std::size_t replica = 1;
  std::string out;
  std::string format = "json";
  bool format_given = false;
  unsigned threads = 0;
  std::string replicas_out;
  std::string scalar_out;
  std::string blocks_out;
  std::vector<std::string> diagnostics;
  bool dry_run = false;
  std::string input;
  std::size_t grid_points = 101;
  double grid_min = -2.5;
  double grid_max = 2.5;
};

class Violations {
 public:
  void add(std::string msg) { list_.push_back(std::move(msg)); }
  void check() const {
    if (list_.empty()) return;
    std::string msg = "invalid arguments:";
    for (const auto& v : list_) msg += "\n  - " + v;
    throw UsageError(msg);
  }

 private:
  std::vector<std::string> list_;
};

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::optional<jclt::EnsembleSpec> resolve_spec(const Options& o, Violations& v) {
  if (o.beta && !o.ensemble.empty()) {
    v.add("--beta and --ensemble are mutually exclusive");
    return std::nullopt;
  }
  try {
    if (!o.ensemble.empty()) {
      const auto first = o.ensemble.find_first_not_of(" \t\r\n");
      const bool inline_json = first != std::string::npos && o.ensemble[first] == '{';
      return jclt::spec_from_json_text(inline_json ? o.ensemble : read_text(o.ensemble));
    }
    return jclt::EnsembleSpec::gbe(o.beta.value_or(2.0));
  } catch (const std::exception& e) {
    v.add(e.what());
    return std::nullopt;
  }
}

void require_n(const Options& o, Violations& v, std::size_t min_n) {
  if (!o.n) {
    v.add("missing required flag --n");
  } else if (*o.n < min_n) {
    v.add("--n must be >= " + std::to_string(min_n));
  }
}

void require_z(const Options& o, Violations& v) {
  if (!o.z) {
    v.add("missing required flag --z");
  } else if (*o.z == 0.0 || !(std::abs(*o.z) < 2.0)) {
    v.add("--z must satisfy 0 < |z| < 2");
  }
}

void check_common(const Options& o, Violations& v, const std::vector<std::string>& formats) {
  if (!(o.kappa > 0.0)) v.add("--kappa must be > 0");
  if (!(o.tau > 0.25 && o.tau < 0.4)) v.add("--tau must lie in (1/4, 2/5)");
  if (!(o.epsilon > 0.0 && o.epsilon < 1.0)) v.add("--epsilon must lie in (0, 1)");
  if (o.replica < 1) v.add("--replica must be >= 1");
  if (std::find(formats.begin(), formats.end(), o.format) == formats.end()) {
    std::string allowed;
    for (const auto& f : formats) allowed += (allowed.empty() ? "" : ", ") + f;
    v.add("--format must be one of: " + allowed);
  }
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
  } else {
    jclt::write_file(o.out, text);
  }
}

jclt::Seed replica_seed(const Options& o) { return {o.seed, o.replica}; }

// ---------------------------------------------------------------- commands

int cmd_sample(Options o) {
  if (!o.format_given) o.format = "csv";
  Violations v;
  const auto spec = resolve_spec(o, v);
  require_n(o, v, 1);
  check_common(o, v, {"json", "csv"});
  v.check();
  const jclt::JacobiMatrix m = jclt::sample(*spec, *o.n, replica_seed(o));
  if (o.format == "csv") {
    emit(o, jclt::to_csv_string([&](std::ostream& os) { jclt::write_matrix_csv(os, m); }));
  } else {
    jclt::Json j;
    j["spec"] = jclt::to_json(*spec);
    j["n"] = m.n;
    j["seed"] = {{"root", o.seed}, {"stream", o.replica}};
    j["rejections"] = m.rejections;
    j["b"] = m.b;
    j["a"] = m.a;
    emit(o, jclt::dump(j));
  }
  return kExitOk;
}

int cmd_trace(Options o) {
  if (!o.format_given) o.format = "csv";
  Violations v;
  const auto spec = resolve_spec(o, v);
  require_n(o, v, 1);
  require_z(o, v);
  check_common(o, v, {"json", "csv"});
  v.check();
  const jclt::JacobiMatrix m = jclt::sample(*spec, *o.n, replica_seed(o));
  const jclt::RecursionTrace tr = jclt::evolve(m, *o.z, o.kappa, spec->c_rule);
  if (o.format == "csv") {
    emit(o, jclt::to_csv_string([&](std::ostream& os) { jclt::write_trace_csv(os, tr); }));
  } else {
    jclt::Json j;
    j["n"] = tr.indices.n;
    j["z"] = tr.indices.z;
    j["kappa"] = tr.indices.kappa;
    j["k0"] = tr.indices.k0;
    j["l0"] = tr.indices.l0;
    j["log_abs_psi_n"] = jclt::json_number(tr.log_abs_psi_n);
    j["sign_n"] = tr.sign_n;
    j["w"] = jclt::json_number(jclt::w_statistic(tr, spec->v));
    j["flagged"] = tr.flagged;
    emit(o, jclt::dump(j));
  }
  if (!o.scalar_out.empty()) {
    const jclt::ScalarSeries s = jclt::scalar_series(m, tr, spec->c_rule);
    if (!s.coefficients.warning.empty()) std::cerr << "warning: " << s.coefficients.warning << "\n";
    jclt::write_file(o.scalar_out,
                     jclt::to_csv_string([&](std::ostream& os) { jclt::write_scalar_csv(os, tr, s); }));
  }
  if (!o.blocks_out.empty()) {
    const jclt::BlockTrace bt = jclt::run_blocks(tr, spec->c_rule, {o.tau});
    for (const auto& w : bt.warnings) std::cerr << "warning: " << w << "\n";
    jclt::write_file(o.blocks_out, jclt::to_csv_string([&](std::ostream& os) { jclt::write_blocks_csv(os, bt); }));
  }
  return kExitOk;
}

int cmd_clt(Options o) {
  Violations v;
  const auto spec = resolve_spec(o, v);
  require_n(o, v, 2);
  require_z(o, v);
  if (!o.samples) {
    v.add("missing required flag --samples");
  } else if (*o.samples < 2) {
    v.add("--samples must be >= 2");
  }
  check_common(o, v, {"json", "csv"});
  jclt::DiagnosticsFlags flags;
  for (const auto& d : o.diagnostics) {
    if (d == "scalar") {
      flags.scalar = true;
    } else if (d == "transition") {
      flags.transition = true;
    } else if (d == "blocks") {
      flags.blocks = true;
    } else {
      v.add("unknown diagnostic '" + d + "' (scalar, transition, blocks)");
    }
  }
  v.check();
  jclt::CltConfig c;
  c.spec = *spec;
  c.n = *o.n;
  c.z = *o.z;
  c.kappa = o.kappa;
  c.samples = *o.samples;
  c.seed = o.seed;
  c.epsilon = o.epsilon;
  c.tau = o.tau;
  c.diagnostics = flags;
  c.threads = jclt::resolve_threads(o.threads);
  const jclt::CltReport rep = jclt::mc_clt(c);
  if (o.format == "json") {
    emit(o, jclt::dump(jclt::to_json(rep)));
  } else {
    emit(o, jclt::to_csv_string([&](std::ostream& os) { jclt::write_replicas_csv(os, rep.replicas); }));
  }
  if (!o.replicas_out.empty()) {
    jclt::write_file(o.replicas_out,
                     jclt::to_csv_string([&](std::ostream& os) { jclt::write_replicas_csv(os, rep.replicas); }));
  }
  return kExitOk;
}

int cmd_esd(Options o) {
  Violations v;
  const auto spec = resolve_spec(o, v);
  require_n(o, v, 1);
  check_common(o, v, {"json", "csv"});
  if (o.grid_points < 2) v.add("--grid-points must be >= 2");
  if (!(o.grid_min < o.grid_max)) v.add("--grid-min must be < --grid-max");
  v.check();
  const jclt::EsdReport e =
      jclt::esd_report(*spec, *o.n, replica_seed(o), jclt::default_esd_grid(o.grid_points, o.grid_min, o.grid_max));
  if (o.format == "json") {
    emit(o, jclt::dump(jclt::to_json(e)));
  } else {
    emit(o, jclt::to_csv_string([&](std::ostream& os) { jclt::write_esd_csv(os, e); }));
  }
  return kExitOk;
}

int cmd_blocks(Options o) {
  Violations v;
  check_common(o, v, {"json", "csv"});
  if (o.dry_run) {
    require_n(o, v, 1);
    require_z(o, v);
    v.check();
    const jclt::CriticalIndices ci = jclt::critical_indices(*o.n, *o.z, o.kappa);
    const double nu = o.nu.value_or(o.kappa);
    const jclt::BlockSchedule s = jclt::block_schedule(ci.k0, o.kappa, o.tau, nu);
    if (o.format == "json") {
      emit(o, jclt::dump(jclt::to_json(s)));
    } else {
      emit(o, jclt::to_csv_string([&](std::ostream& os) { jclt::write_schedule_csv(os, s); }));
    }
    return kExitOk;
  }
  const auto spec = resolve_spec(o, v);
  require_n(o, v, 2);
  require_z(o, v);
  if (o.nu) v.add("--nu is only meaningful with --dry-run (nu is realized from l_1 otherwise)");
  v.check();
  const jclt::JacobiMatrix m = jclt::sample(*spec, *o.n, replica_seed(o));
  const jclt::RecursionTrace tr = jclt::evolve(m, *o.z, o.kappa, spec->c_rule);
  const jclt::BlockTrace bt = jclt::run_blocks(tr, spec->c_rule, {o.tau});
  for (const auto& w : bt.warnings) std::cerr << "warning: " << w << "\n";
  if (o.format == "json") {
    emit(o, jclt::dump(jclt::to_json(bt)));
  } else {
    emit(o, jclt::to_csv_string([&](std::ostream& os) { jclt::write_blocks_csv(os, bt); }));
  }
  return kExitOk;
}

int cmd_concentration(Options o) {
  Violations v;
  if (o.input.empty()) v.add("missing required flag --input");
  if (!(o.epsilon > 0.0)) v.add("--epsilon must be > 0");
  if (o.format != "json" && o.format != "csv") v.add("--format must be one of: json, csv");
  v.check();
  std::istringstream in(read_text(o.input));
  std::vector<double> xs;
  std::string tok;
  while (in >> tok) {
    if (tok.find_first_not_of("0123456789+-.eE") != std::string::npos) {
      if (xs.empty()) continue;  // tolerate a header token
      throw UsageError("non-numeric token '" + tok + "' in " + o.input);
    }
    xs.push_back(std::stod(tok));
  }
  if (xs.empty()) throw UsageError("no samples in " + o.input);
  const double q = jclt::levy_q(xs, o.epsilon);
  if (o.format == "json") {
    jclt::Json j;
    j["n"] = xs.size();
    j["epsilon"] = o.epsilon;
    j["q"] = q;
    emit(o, jclt::dump(j));
  } else {
    emit(o, "n,epsilon,q\n" + std::to_string(xs.size()) + "," + jclt::format_double(o.epsilon) + "," +
                jclt::format_double(q) + "\n");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- flags

void add_spec_flags(CLI::App* sub, Options& o) {
  sub->add_option("--beta", o.beta, "Gaussian beta ensemble parameter (default 2)");
  sub->add_option("--ensemble", o.ensemble, "ensemble spec as inline JSON or a path to a JSON file");
}

void add_seed_flags(CLI::App* sub, Options& o) {
  sub->add_option("--seed", o.seed, "root seed");
  sub->add_option("--replica", o.replica, "stream index of the replica (default 1)");
}

void add_output_flags(CLI::App* sub, Options& o) {
  sub->add_option("--out", o.out, "output path (default stdout)");
  sub->add_option("--format", o.format, "json or csv")->each([&o](const std::string&) { o.format_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random Jacobi matrices: characteristic polynomial recursion, CLT harness and diagnostics"};
  app.require_subcommand(1);
  Options o;

  auto* sample = app.add_subcommand("sample", "sample one Jacobi matrix");
  add_spec_flags(sample, o);
  sample->add_option("--n", o.n, "dimension");
  add_seed_flags(sample, o);
  add_output_flags(sample, o);

  auto* trace = app.add_subcommand("trace", "per-step trace of the scaled recursion for one replica");
  add_spec_flags(trace, o);
  trace->add_option("--n", o.n, "dimension");
  trace->add_option("--z", o.z, "spectral parameter, 0 < |z| < 2");
  trace->add_option("--kappa", o.kappa, "transition half-width constant (default 4)");
  trace->add_option("--tau", o.tau, "block schedule exponent in (1/4, 2/5) (default 1/3)");
  trace->add_option("--epsilon", o.epsilon, "scalar window fraction (default 0.1)");
  add_seed_flags(trace, o);
  add_output_flags(trace, o);
  trace->add_option("--scalar-out", o.scalar_out, "also write k,delta,delta_bar,Delta_bar CSV");
  trace->add_option("--blocks-out", o.blocks_out, "also write the stopping-time block CSV");

  auto* clt = app.add_subcommand("clt", "Monte Carlo experiment for w_n(z)");
  add_spec_flags(clt, o);
  clt->add_option("--n", o.n, "dimension");
  clt->add_option("--z", o.z, "spectral parameter, 0 < |z| < 2");
  clt->add_option("--kappa", o.kappa, "transition half-width constant (default 4)");
  clt->add_option("--tau", o.tau, "block schedule exponent (default 1/3)");
  clt->add_option("--epsilon", o.epsilon, "scalar window fraction (default 0.1)");
  clt->add_option("--samples", o.samples, "number of replicas N");
  clt->add_option("--seed", o.seed, "root seed");
  clt->add_option("--threads", o.threads, "worker threads (default JCLT_THREADS or all cores)");
  clt->add_option("--diagnostics", o.diagnostics, "any of: scalar transition blocks")->delimiter(',');
  clt->add_option("--replicas-out", o.replicas_out, "also write the per-replica CSV");
  add_output_flags(clt, o);

  auto* esd = app.add_subcommand("esd", "empirical spectral distribution by Sturm counting");
  add_spec_flags(esd, o);
  esd->add_option("--n", o.n, "dimension");
  esd->add_option("--grid-points", o.grid_points, "grid size (default 101)");
  esd->add_option("--grid-min", o.grid_min, "grid start (default -2.5)");
  esd->add_option("--grid-max", o.grid_max, "grid end (default 2.5)");
  add_seed_flags(esd, o);
  add_output_flags(esd, o);

  auto* blocks = app.add_subcommand("blocks", "stopping-time blocks of one replica");
  add_spec_flags(blocks, o);
  blocks->add_option("--n", o.n, "dimension");
  blocks->add_option("--z", o.z, "spectral parameter, 0 < |z| < 2");
  blocks->add_option("--kappa", o.kappa, "transition half-width constant (default 4)");
  blocks->add_option("--tau", o.tau, "block schedule exponent (default 1/3)");
  blocks->add_option("--nu", o.nu, "schedule offset for --dry-run (default kappa)");
  blocks->add_flag("--dry-run", o.dry_run, "print the deterministic schedule (i, l_hat, j) only");
  add_seed_flags(blocks, o);
  add_output_flags(blocks, o);

  auto* conc = app.add_subcommand("concentration", "Levy concentration function of a sample file");
  conc->add_option("--input", o.input, "whitespace-separated numbers");
  conc->add_option("--epsilon", o.epsilon, "half-width (default 0.1)");
  add_output_flags(conc, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*sample) return cmd_sample(o);
    if (*trace) return cmd_trace(o);
    if (*clt) return cmd_clt(o);
    if (*esd) return cmd_esd(o);
    if (*blocks) return cmd_blocks(o);
    if (*conc) return cmd_concentration(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const jclt::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const jclt::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
