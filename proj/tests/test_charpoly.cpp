#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "jclt/charpoly.hpp"
#include "jclt/ensemble.hpp"
#include "jclt/error.hpp"
#include "support/oracles.hpp"

using Catch::Approx;
using namespace jclt;

namespace {

JacobiMatrix zero_matrix(std::size_t n) {
  JacobiMatrix m;
  m.n = n;
  m.b.assign(n, 0.0);
  m.a.assign(n - 1, 0.0);
  return m;
}

long double psi_oracle(const JacobiMatrix& m, double z, double kappa, CRule rule, std::size_t k_max) {
  const auto ci = critical_indices(m.n, z, kappa);
  const auto phi = oracle::phi(m, z);
  long double denom = std::exp(0.5L * oracle::log_factorial(k_max));
  for (std::size_t k = 1; k <= k_max; ++k) denom *= alpha_value(ci, rule, k);
  return phi[k_max] / denom;
}

}  // namespace

TEST_CASE("critical_indices examples") {
  auto ci = critical_indices(100, 1.0, 4.0);
  CHECK(ci.k0 == 25);
  CHECK(ci.l0 == 11);
  ci = critical_indices(400, 1.9, 1.0);
  CHECK(ci.k0 == 361);
  ci = critical_indices(4, 0.1, 4.0);
  CHECK(ci.k0 == 0);
  CHECK(ci.l0 == 0);
  CHECK(ci.z_k(1) == Approx(0.2));
  CHECK_THROWS_AS(critical_indices(10, 0.0, 4.0), DomainError);
  CHECK_THROWS_AS(critical_indices(10, 2.0, 4.0), DomainError);
  CHECK_THROWS_AS(critical_indices(10, -2.5, 4.0), DomainError);
  for (double z : {0.3, 1.0, 1.99, -1.5}) {
    const auto c = critical_indices(1000, z, 4.0);
    CHECK(c.k0 < c.n);
  }
}

TEST_CASE("alpha branches") {
  CHECK(alpha_scalar_branch(2.5, 0.0) == Approx(2.0).epsilon(1e-15));
  CHECK(alpha_scalar_branch(2.0, 0.0) == 1.0);
  CHECK_THROWS_AS(alpha_scalar_branch(1.0, 0.0), NumericError);

  const auto ci = critical_indices(4096, 1.0, 4.0);
  const auto alpha = alpha_sequence(ci, CRule::Gbe);
  REQUIRE(alpha.size() == 4096);
  const auto kb = static_cast<std::size_t>(ci.scalar_end());
  for (std::size_t k = kb; k <= 4096; ++k) CHECK(alpha.at(k) == 1.0);
  for (std::size_t k = 1; k < kb; ++k) {
    CHECK(alpha.at(k) > 1.0);
    if (k >= 2) CHECK(alpha.at(k) <= alpha.at(k - 1));
  }
}

TEST_CASE("negative discriminant names the offending index") {
  // With c = 0 the discriminant z_k^2/4 - 1 is negative once k > k0; a
  // hand-built index set with l0 = 0 and k0 beyond the crossing triggers it.
  CriticalIndices ci = critical_indices(100, 1.0, 4.0);
  ci.k0 = 60;
  ci.l0 = 0;
  try {
    alpha_sequence(ci, CRule::Zero);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("k = 26") != std::string::npos);
  }
}

TEST_CASE("phi_exact") {
  const auto m1 = sample_gbe(1, 2.0, {1, 1});
  CHECK(static_cast<double>(phi_exact(m1, 0.7)[1]) == Approx(0.7 - m1.b[0]).epsilon(1e-15));

  const auto m2 = sample_gbe(2, 2.0, {1, 2});
  const double s = 0.7 * std::sqrt(2.0);
  const double det = (s - m2.b[1]) * (s - m2.b[0]) - m2.a[0] * m2.a[0];
  CHECK(static_cast<double>(phi_exact(m2, 0.7)[2]) == Approx(det).epsilon(1e-14));

  const auto z6 = zero_matrix(6);
  const auto p = phi_exact(z6, 1.3);
  for (std::size_t k = 0; k <= 6; ++k) {
    CHECK(static_cast<double>(p[k]) == Approx(std::pow(1.3 * std::sqrt(6.0), static_cast<double>(k))).epsilon(1e-14));
  }
  CHECK_THROWS_AS(phi_exact(sample_gbe(65, 2.0, {1, 1}), 1.0), OracleRangeError);
  CHECK_NOTHROW(phi_exact(sample_gbe(65, 2.0, {1, 1}), 1.0, 100));
}

TEST_CASE("evolve: psi_1 and oracle equivalence for n <= 12") {
  for (double beta : {1.0, 2.0, 4.0}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      for (std::size_t n : {1u, 2u, 5u, 10u, 12u}) {
        for (double z : {1.0, -0.6, 1.8}) {
          const auto m = sample_gbe(n, beta, {seed, n});
          const auto tr = evolve(m, z, 4.0, CRule::Gbe);
          const auto ci = tr.indices;
          const double psi1 = tr.sign[0] * std::exp(tr.log_abs_psi(1));
          CHECK(psi1 == Approx((z * std::sqrt(double(n)) - m.b[0]) / alpha_value(ci, CRule::Gbe, 1)).epsilon(1e-13));
          for (std::size_t k = 1; k <= n; ++k) {
            const long double ref = psi_oracle(m, z, 4.0, CRule::Gbe, k);
            const long double prev = k >= 2 ? psi_oracle(m, z, 4.0, CRule::Gbe, k - 1) : 1.0L;
            // exp(s_k) u_k reconstructs X_k = (psi_k, psi_{k-1})
            const double scale = std::exp(tr.s[k - 1]);
            CHECK(std::abs(scale * tr.u1[k - 1] - ref) <= 1e-10 * std::abs(ref));
            CHECK(std::abs(scale * tr.u2[k - 1] - prev) <= 1e-10 * std::abs(prev));
            CHECK(std::hypot(tr.u1[k - 1], tr.u2[k - 1]) == Approx(1.0).margin(1e-12));
            if (k >= 2) CHECK(tr.delta_at(k) == Approx(static_cast<double>(ref / prev - 1.0L)).margin(1e-10));
          }
        }
      }
    }
  }
}

TEST_CASE("evolve: noise-free closed form when k0 = 0") {
  const std::size_t n = 4;
  const double z = 0.9;
  const auto tr = evolve(zero_matrix(n), z, 4.0, CRule::Zero);
  REQUIRE(tr.indices.k0 == 0);
  for (std::size_t k = 1; k <= n; ++k) {
    double closed = 1.0;
    for (std::size_t j = 1; j <= k; ++j) closed *= z * std::sqrt(double(n) / double(j));
    CHECK(std::exp(tr.log_abs_psi(k)) == Approx(closed).epsilon(1e-13));
  }
}

TEST_CASE("evolve: exact zero is flagged and the run continues") {
  JacobiMatrix m = zero_matrix(3);
  const double z = 1.0;
  m.b[0] = z * std::sqrt(3.0);  // psi_1 = 0
  const auto tr = evolve(m, z, 4.0, CRule::Zero);
  REQUIRE(tr.length() == 3);
  CHECK(tr.is_flagged(1));
  CHECK(std::isinf(tr.delta_at(2)));
  CHECK(!tr.flagged.empty());
}

TEST_CASE("log-scale offset does not change directions, ratios or the statistic") {
  const auto m = sample_gbe(2048, 2.0, {9, 9});
  const auto plan = make_plan(2048, 1.0, 4.0, CRule::Gbe);
  const auto a = evolve(plan, m);
  EvolveOptions opt;
  opt.start.x = std::ldexp(1.0, -40);
  opt.start.exponent = 40;
  const auto b = evolve(plan, m, opt);
  CHECK(a.u1 == b.u1);
  CHECK(a.u2 == b.u2);
  for (std::size_t k = 1; k <= 2048; ++k) REQUIRE(a.delta[k - 1] == b.delta[k - 1]);
  CHECK(w_statistic(a, 1.0) == Approx(w_statistic(b, 1.0)).margin(1e-12));
}

TEST_CASE("sign of z is carried by alpha") {
  auto m = sample_gbe(512, 2.0, {4, 4});
  auto neg = m;
  for (auto& b : neg.b) b = -b;
  const auto a = evolve(m, 1.1, 4.0, CRule::Gbe);
  const auto b = evolve(neg, -1.1, 4.0, CRule::Gbe);
  CHECK(a.log_abs_psi_n == Approx(b.log_abs_psi_n).margin(1e-12));
  CHECK(log_cn_exact(512, 1.1, 4.0, CRule::Gbe) == Approx(log_cn_exact(512, -1.1, 4.0, CRule::Gbe)).margin(1e-12));
}

TEST_CASE("no overflow at n = 2^20") {
  const std::size_t n = std::size_t{1} << 20;
  const auto m = sample_gbe(n, 2.0, {20, 1});
  const auto plan = make_plan(n, 1.0, 4.0, CRule::Gbe);
  bool finite = true;
  run_recursion(plan, m, [&](std::size_t, const ScaledState& st) {
    finite = finite && std::isfinite(st.x) && std::isfinite(st.y) && std::abs(st.x) + std::abs(st.y) > 0.0;
  });
  CHECK(finite);
}

TEST_CASE("log C_n") {
  CHECK(log_cn_exact(1, 1.0, 4.0, CRule::Gbe) == 0.0);

  // Direct long-double re-summation at n = 100.
  const auto ci = critical_indices(100, 1.0, 4.0);
  long double ref = 0.5L * (oracle::log_factorial(100) - 100.0L * std::log(100.0L));
  for (std::size_t k = 1; k <= 100; ++k) ref += std::log(std::abs(static_cast<long double>(alpha_value(ci, CRule::Gbe, k))));
  CHECK(log_cn_exact(100, 1.0, 4.0, CRule::Gbe) == Approx(static_cast<double>(ref)).margin(1e-10));

  CHECK(log_factorial(1001) == Approx(static_cast<double>(oracle::log_factorial(1001))).epsilon(1e-14));

  // kappa changes C_n and psi_n but not their product.
  const auto m = sample_gbe(1000, 2.0, {3, 1});
  const double d2 = log_cn_exact(1000, 1.0, 2.0, CRule::Gbe) + evolve(m, 1.0, 2.0, CRule::Gbe).log_abs_psi_n;
  const double d8 = log_cn_exact(1000, 1.0, 8.0, CRule::Gbe) + evolve(m, 1.0, 8.0, CRule::Gbe).log_abs_psi_n;
  CHECK(d2 == Approx(d8).margin(1e-8));
}

TEST_CASE("log C_n asymptotics") {
  CHECK(log_cn_asymptotic(1, 1.2) == Approx(1.44 / 4.0 - 0.5));
  CHECK_THROWS_AS(log_cn_asymptotic(10, 0.0), DomainError);
  // The remainder is O(1) in n for each fixed kappa. Its value depends on
  // kappa (truncating the alpha product at k0 - l0 drops roughly
  // (2/3) kappa^{3/2}), so the bound of 5 is met at kappa = 1 only.
  const std::size_t n15 = std::size_t{1} << 15, n16 = std::size_t{1} << 16;
  for (double kappa : {1.0, 4.0}) {
    const double r15 = log_cn_exact(n15, 1.0, kappa, CRule::Gbe) - log_cn_asymptotic(n15, 1.0);
    const double r16 = log_cn_exact(n16, 1.0, kappa, CRule::Gbe) - log_cn_asymptotic(n16, 1.0);
    INFO("kappa " << kappa);
    CHECK(std::abs(r16 - r15) < 1.0);
  }
  CHECK(std::abs(log_cn_exact(n16, 1.0, 1.0, CRule::Gbe) - log_cn_asymptotic(n16, 1.0)) <= 5.0);
}

TEST_CASE("w_statistic scaling") {
  const std::size_t n = 5000;
  const double ln = std::log(double(n));
  CHECK(w_statistic(-ln / 6.0, n, 1.0) == Approx(0.0).margin(1e-15));
  CHECK(w_statistic(-ln / 6.0 + std::sqrt(0.5 * ln / 2.0), n, 0.5) == Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(w_statistic(0.0, 1, 1.0), ParameterError);
  const auto m = sample_gbe(100, 2.0, {1, 1});
  const auto partial = evolve(m, 1.0, 4.0, CRule::Gbe, {50});
  CHECK_THROWS_AS(w_statistic(partial, 1.0), ParameterError);
}

TEST_CASE("transfer matrices reproduce the recursion step") {
  const std::size_t n = 1000;
  const auto m = sample_gbe(n, 2.0, {12, 1});
  const auto tr = evolve(m, 1.0, 4.0, CRule::Gbe);
  const auto& ci = tr.indices;
  for (std::size_t k = 2; k <= n; k += 7) {
    const auto tp = transfer_matrices(ci, CRule::Gbe, m, k);
    const Vec2 prev{tr.u1[k - 2], tr.u2[k - 2]};
    const Vec2 step = (tp.A + tp.W) * prev;
    const double ratio = std::exp(tr.s[k - 1] - tr.s[k - 2]);
    INFO("k " << k);
    CHECK(step.x == Approx(ratio * tr.u1[k - 1]).epsilon(1e-12).margin(1e-15));
    CHECK(step.y == Approx(ratio * tr.u2[k - 1]).epsilon(1e-12).margin(1e-15));
    CHECK(tp.W.c == 0.0);
    CHECK(tp.W.d == 0.0);
  }
  CHECK_THROWS_AS(transfer_matrices(ci, CRule::Gbe, m, 1), ParameterError);
  CHECK_THROWS_AS(transfer_matrices(ci, CRule::Gbe, m, n + 1), ParameterError);

  const auto spec = EnsembleSpec::general(1.0, NoiseLaw::Zero, NoiseLaw::Zero, CRule::Zero);
  const auto quiet = sample_general(400, spec, {1, 1});
  const auto qci = critical_indices(400, 1.0, 4.0);
  for (std::size_t k = 2; k <= 400; ++k) {
    const auto tp = transfer_matrices(qci, CRule::Zero, quiet, k);
    REQUIRE(tp.W.max_abs() < 1e-12);
    if (static_cast<long long>(k) > qci.scalar_end()) {
      CHECK(tp.A.a == Approx(qci.z_k(k)));
      CHECK(tp.A.b == -1.0);
      CHECK(tp.A.c == 1.0);
      CHECK(tp.A.d == 0.0);
    }
  }
}
