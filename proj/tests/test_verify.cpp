#include <doctest.h>

#include <cmath>

#include "kdvact/potential.hpp"
#include "kdvact/numerics.hpp"
#include "kdvact/verify.hpp"

using namespace kdvact;

namespace {

const IdentityEntry& entry(const IdentityReport& rep, const std::string& name) {
  for (const auto& e : rep.entries) {
    if (e.name == name) return e;
  }
  throw std::runtime_error("missing identity entry " + name);
}

const InequalityEntry& entry(const InequalityReport& rep, const std::string& name) {
  for (const auto& e : rep.entries) {
    if (e.name == name) return e;
  }
  throw std::runtime_error("missing inequality entry " + name);
}

}  // namespace

TEST_SUITE_BEGIN("verify");

TEST_CASE("identities on the zero potential") {
  VerifyOptions opt;
  opt.spectrum.gap_count = 4;
  const auto rep = identity_report(make_potential({}, {}), opt);
  CHECK(rep.all_pass);
  CHECK(rep.reliable);
  for (const auto& e : rep.entries) {
    CHECK(e.pass);
    CHECK(e.rel_residual == 0.0);
  }
}

TEST_CASE("identities on 2 cos 2 pi x") {
  VerifyOptions opt;
  const auto rep = identity_report(make_potential({2.0}, {0.0}), opt);
  CHECK(rep.all_pass);
  const auto& parseval = entry(rep, "P1=H1/2");
  CHECK(parseval.rhs == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(parseval.rel_residual < 1e-6);
  CHECK(entry(rep, "H2=P3-W").rel_residual < 1e-6);
  CHECK(entry(rep, "2P1=4S0").rel_residual == 0.0);
  CHECK(entry(rep, "q0=2Q0").rel_residual < 1e-5);
  CHECK(entry(rep, "16Q4=H2(q+q0)").rel_residual < 1e-4);
}

TEST_CASE("flagship identity with both pipelines independent") {
  VerifyOptions opt;
  const auto rep = identity_report(make_potential({2.0, 1.0}, {0.0, 0.0}), opt);
  CHECK(entry(rep, "H2=P3-W").rel_residual < 1e-6);
  CHECK(entry(rep, "H2=8(S1-S-1*S0)").rel_residual < 1e-4);
  CHECK(entry(rep, "8Q2=H1+q0^2").rel_residual < 1e-5);
}

TEST_CASE("flagship residual is tail-driven: starved N vs N + 4") {
  VerifyOptions starved;
  starved.spectrum.gap_count = 2;
  const auto r2 = identity_report(make_potential({2.0}, {0.0}), starved);
  starved.spectrum.gap_count = 6;
  const auto r6 = identity_report(make_potential({2.0}, {0.0}), starved);
  const double res2 = entry(r2, "H2=P3-W").rel_residual;
  const double res6 = entry(r6, "H2=P3-W").rel_residual;
  CHECK(res6 < res2);
}

TEST_CASE("starved spectra flag the identity report unreliable") {
  VerifyOptions opt;
  opt.spectrum.gap_count = 1;  // truncates most of the P3 mass
  const auto rep = identity_report(make_potential({2.0}, {0.0}), opt);
  CHECK_FALSE(rep.reliable);
  CHECK(rep.tail_rel > opt.tail_tol);
  // the report is still generated in full
  CHECK(rep.entries.size() >= 9);
}

TEST_CASE("inequality battery") {
  VerifyOptions opt;
  const auto rz = inequality_report(make_potential({}, {}), opt);
  CHECK(rz.all_pass);

  const auto rep = inequality_report(make_potential({2.0}, {0.0}), opt);
  CHECK(rep.all_pass);
  CHECK(entry(rep, "1.12.upper").margin > 0.0);
  CHECK(entry(rep, "1.13.lower").pass);
  CHECK(entry(rep, "1.13.upper.safe").pass);
  CHECK(entry(rep, "2.33.upper").pass);
  CHECK(entry(rep, "3.2.b").pass);
  CHECK(entry(rep, "3.17.d").pass);
  CHECK(entry(rep, "4.18").pass);
  CHECK(entry(rep, "4.19").pass);
  CHECK(rep.per_gap.count("3.8.lower") == 1);

  // one corpus member end to end (full corpus is exercised by the acceptance suite)
  const auto corpus = corpus_potentials(kCorpusSeed);
  const auto rc = inequality_report(corpus[0], opt);
  CHECK(rc.all_pass);
}

TEST_CASE("nonlinear part is positive iff a gap is open") {
  VerifyOptions opt;
  opt.spectrum.gap_count = 4;
  const auto specz = band_edges(make_potential({}, {}), opt.spectrum);
  CHECK(moments(make_potential({}, {}), specz).W == 0.0);

  const auto spec = band_edges(make_potential({2.0}, {0.0}), opt.spectrum);
  CHECK(moments(make_potential({2.0}, {0.0}), spec).W > 0.0);
}

TEST_CASE("quadratic scan validation and normal-form ratios") {
  VerifyOptions opt;
  const Potential family = make_potential({2.0}, {0.0});
  CHECK_THROWS_AS(quadratic_scan(family, {}, opt), std::invalid_argument);
  CHECK_THROWS_AS(quadratic_scan(family, {1e-3, 1e-2}, opt), std::invalid_argument);
  CHECK_THROWS_AS(quadratic_scan(family, {-1.0}, opt), std::invalid_argument);

  const auto rows = quadratic_scan(family, {1e-2, 1e-3}, opt);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ratio > 0.8);
  CHECK(rows[0].ratio < 1.2);
  CHECK(rows[1].ratio > 0.98);
  CHECK(rows[1].ratio < 1.02);
  CHECK(rows[0].V > 0.0);
}

TEST_CASE("hessian estimate near the origin and at finite amplitude") {
  VerifyOptions opt;
  const Potential fa = make_potential({2.0}, {0.0});
  const Potential fb = make_potential({0.0, 1.0}, {0.0, 0.0});
  const auto est = hessian_check(fa, fb, 1e-2, 1e-2, 2e-3, opt);
  CHECK(est.jacobian_cond < 1e6);
  CHECK(est.hessian(0, 0) == doctest::Approx(6.0).epsilon(0.15));
  CHECK(est.hessian(1, 1) == doctest::Approx(6.0).epsilon(0.15));
  CHECK(std::abs(est.hessian(0, 1)) < 0.9);
  CHECK(std::abs(est.hessian(0, 1) - est.hessian(1, 0)) <=
        1e-3 * std::max(1.0, std::abs(est.hessian(0, 1))));
  CHECK(est.positive_definite);
  CHECK(est.tail_fraction < 0.05);

  const auto est1 = hessian_check(fa, fb, 1.0, 1.0, 1e-2, opt);
  CHECK(est1.positive_definite);

  CHECK_THROWS_AS(hessian_check(fa, fb, 1e-2, 1e-2, 0.0, opt), std::invalid_argument);

  // two copies of the same family drive the same gap: the (a,b) -> (I1,I2)
  // Jacobian is singular and the estimate must be rejected
  CHECK_THROWS_AS(hessian_check(fa, fa, 1e-2, 1e-2, 2e-3, opt), NumericalError);
}

TEST_CASE("corpus generation is deterministic and within bounds") {
  const auto a = corpus_potentials(kCorpusSeed);
  const auto b = corpus_potentials(kCorpusSeed);
  REQUIRE(a.size() == 10);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].modes() == b[i].modes());
    CHECK(a[i].modes() >= 1);
    CHECK(a[i].modes() <= 4);
    for (int j = 0; j < a[i].modes(); ++j) {
      CHECK(a[i].cos_coeffs[j] == b[i].cos_coeffs[j]);
      CHECK(std::abs(a[i].cos_coeffs[j]) <= 2.0);
      CHECK(std::abs(a[i].sin_coeffs[j]) <= 2.0);
    }
  }
  const auto c = corpus_potentials(kCorpusSeed + 1);
  CHECK(c[0].cos_coeffs[0] != a[0].cos_coeffs[0]);
}

TEST_SUITE_END();
