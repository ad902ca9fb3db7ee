#include "catch_amalgamated.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <string>
#include <vector>

#include "jclt/io.hpp"

using namespace jclt;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("spec JSON round trip") {
  const std::vector<EnsembleSpec> specs{
      EnsembleSpec::gbe(2.0), EnsembleSpec::gbe(0.7),
      EnsembleSpec::general(0.5, NoiseLaw::Laplace, NoiseLaw::Uniform, CRule::Zero),
      EnsembleSpec::general(1.0, NoiseLaw::Gaussian, NoiseLaw::Zero, CRule::Gbe)};
  for (const auto& s : specs) {
    const auto back = spec_from_json_text(to_json(s).dump());
    CHECK(back.kind == s.kind);
    CHECK(back.beta == s.beta);
    CHECK(back.v == s.v);
    CHECK(back.b_law == s.b_law);
    CHECK(back.g_law == s.g_law);
    CHECK(back.c_rule == s.c_rule);
  }
  CHECK(to_json(EnsembleSpec::gbe(2.0)).dump() == R"({"kind":"gbe","beta":2.0})");
}

TEST_CASE("spec JSON errors") {
  CHECK_THROWS_AS(spec_from_json_text("{"), ParameterError);
  CHECK_THROWS_AS(spec_from_json_text(R"({"kind":"goe"})"), ParameterError);
  CHECK_THROWS_AS(spec_from_json_text(R"({"kind":"gbe"})"), ParameterError);
  CHECK_THROWS_AS(spec_from_json_text(R"({"kind":"gbe","beta":"two"})"), ParameterError);
  CHECK_THROWS_AS(spec_from_json_text(R"({"kind":"gbe","beta":-1})"), ParameterError);
  CHECK_THROWS_AS(spec_from_json_text(R"({"kind":"general","v":1,"b_law":"cauchy"})"), ParameterError);
}

TEST_CASE("format_double") {
  for (double x : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -1.7976931348623157e308}) {
    const std::string s = format_double(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == x);
    CHECK(std::signbit(back) == std::signbit(x));
  }
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(json_number(std::nan("")).is_null());
}

TEST_CASE("CSV headers, row counts and line endings") {
  const std::size_t n = 300;
  const auto m = sample_gbe(n, 2.0, {1, 1});
  const auto tr = evolve(m, 1.0, 4.0, CRule::Gbe);

  const auto mat = to_csv_string([&](std::ostream& os) { write_matrix_csv(os, m); });
  const auto trace = to_csv_string([&](std::ostream& os) { write_trace_csv(os, tr); });
  const auto sched = to_csv_string([&](std::ostream& os) { write_schedule_csv(os, block_schedule(16384, 4.0, 1.0 / 3.0, 4.0)); });
  const auto esd = to_csv_string([&](std::ostream& os) { write_esd_csv(os, esd_report(m, default_esd_grid())); });
  for (const auto* text : {&mat, &trace, &sched, &esd}) CHECK(text->find('\r') == std::string::npos);

  auto l = lines(mat);
  CHECK(l.front() == "k,b,a");
  CHECK(l.size() == n + 1);
  CHECK(l.back().back() == ',');  // no a_n

  l = lines(trace);
  CHECK(l.front() == "k,u1,u2,s,sign,delta,regime");
  CHECK(l.size() == n + 1);
  const auto& ci = tr.indices;
  const auto regime_of = [&](std::size_t k) { return l[k].substr(l[k].rfind(',') + 1); };
  CHECK(regime_of(static_cast<std::size_t>(ci.scalar_end())) == "scalar");
  CHECK(regime_of(static_cast<std::size_t>(ci.scalar_end()) + 1) == "transition");
  CHECK(regime_of(static_cast<std::size_t>(ci.oscillatory_begin())) == "transition");
  CHECK(regime_of(static_cast<std::size_t>(ci.oscillatory_begin()) + 1) == "oscillatory");

  l = lines(sched);
  CHECK(l.front() == "i,l_hat,j");
  CHECK(l.size() == 24);
  CHECK(l[1] == "1,101,8");

  l = lines(esd);
  CHECK(l.front() == "x,count,empirical,semicircle");
  CHECK(l.size() == 102);

  const auto series = scalar_series(m, tr, CRule::Gbe);
  l = lines(to_csv_string([&](std::ostream& os) { write_scalar_csv(os, tr, series); }));
  CHECK(l.front() == "k,delta,delta_bar,Delta_bar");
  CHECK(l.size() == series.delta_bar.size() + 1);

  CltConfig c;
  c.n = 256;
  c.samples = 5;
  c.seed = 1;
  const auto reps = mc_replicas(c);
  l = lines(to_csv_string([&](std::ostream& os) { write_replicas_csv(os, reps); }));
  CHECK(l.front() == "replica,w,log_psi_n,delta_end,flags");
  CHECK(l.size() == 6);
  CHECK(l[1].rfind("1,", 0) == 0);

  const auto big = sample_gbe(std::size_t{1} << 16, 2.0, {2, 2});
  const auto bt = run_blocks(evolve(big, 1.0, 4.0, CRule::Gbe), CRule::Gbe);
  l = lines(to_csv_string([&](std::ostream& os) { write_blocks_csv(os, bt); }));
  CHECK(l.front() == "i,l_i,t_log,eps_i,delta_residue,advanced");
  CHECK(l.size() == bt.blocks.size() + 1);
}

TEST_CASE("report JSON layout") {
  CltConfig c;
  c.n = 512;
  c.samples = 8;
  c.seed = 11;
  c.diagnostics.scalar = true;
  const auto j = to_json(mc_clt(c));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"config", "n_samples", "excluded", "mean", "var", "skew", "kurt", "ks_d",
                                         "ks_p", "ratio_tail", "diagnostics"});
  std::vector<std::string> cfg_keys;
  for (const auto& [k, v] : j["config"].items()) cfg_keys.push_back(k);
  CHECK(cfg_keys ==
        std::vector<std::string>{"spec", "n", "z", "kappa", "N", "seed", "epsilon", "tau", "diagnostics"});
  CHECK(j["config"]["N"] == 8);
  CHECK(j["ratio_tail"].size() == 4);
  CHECK(j["ratio_tail"][0]["eps"] == 0.1);
  CHECK(j["diagnostics"].contains("scalar"));
  CHECK(!j["config"].contains("threads"));
  const std::string text = dump(j);
  CHECK(text.back() == '\n');
  CHECK(text.find('\r') == std::string::npos);
  CHECK(dump(to_json(mc_clt(c))) == text);
}
