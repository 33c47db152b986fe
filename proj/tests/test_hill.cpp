#include <doctest.h>

#include <cmath>

#include "kdvact/hill.hpp"
#include "kdvact/potential.hpp"
#include "kdvact/verify.hpp"
#include "oracles.hpp"

using namespace kdvact;

namespace {

double free_delta(double lambda) {
  return lambda >= 0 ? std::cos(std::sqrt(lambda)) : std::cosh(std::sqrt(-lambda));
}

}  // namespace

TEST_SUITE_BEGIN("hill");

TEST_CASE("zero-potential oracle for the adaptive integrator") {
  const Potential zero = make_potential({}, {});
  for (int i = 0; i <= 25; ++i) {
    const double lam = -10.0 + 410.0 * i / 25.0;
    const auto ev = lyapunov(zero, lam, 1e-12);
    CHECK(std::abs(ev.delta - free_delta(lam)) < 1e-10);
  }
  CHECK(lyapunov(zero, M_PI * M_PI, 1e-12).delta == doctest::Approx(-1.0).epsilon(1e-11));
  CHECK(lyapunov(zero, -1.0, 1e-12).delta == doctest::Approx(std::cosh(1.0)).epsilon(1e-11));
  CHECK_THROWS_AS(lyapunov(zero, 1.0, 1e-3), std::invalid_argument);
}

TEST_CASE("monodromy vs chebyshev collocation") {
  const Potential q = make_potential({2.0}, {0.0});
  for (double lam : {0.0, 7.3, 55.0}) {
    const double ref = oracles::chebyshev_delta(q, lam);
    CHECK(std::abs(lyapunov(q, lam, 1e-12).delta - ref) < 1e-10);
  }
}

TEST_CASE("variational derivative matches finite differences") {
  const auto corpus = corpus_potentials(kCorpusSeed);
  for (const Potential* q : {&corpus[2], &corpus[5]}) {
    // Richardson-extrapolated central differences; deviations measured against the
    // derivative scale of the sample set (the raw value passes through zero at the
    // discriminant extrema).
    double scale = 0.0, worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double lam = -5.0 + 210.0 * i / 19.0;
      const double h = 1e-3 * std::max(1.0, std::abs(lam));
      const auto ev = lyapunov(*q, lam, 1e-12);
      auto central = [&](double step) {
        return (lyapunov(*q, lam + step, 1e-12).delta - lyapunov(*q, lam - step, 1e-12).delta) /
               (2.0 * step);
      };
      const double fd = (4.0 * central(0.5 * h) - central(h)) / 3.0;
      scale = std::max(scale, std::abs(ev.ddelta_dlambda));
      worst = std::max(worst, std::abs(ev.ddelta_dlambda - fd));
    }
    CHECK(worst <= 1e-7 * scale);
  }
}

TEST_CASE("hill matrix: free operator levels") {
  const Potential zero = make_potential({}, {});
  const auto per = hill_matrix_eigenvalues(zero, Periodicity::periodic, 16);
  CHECK(std::abs(per[0]) < 1e-10);
  CHECK(per[1] == doctest::Approx(4 * M_PI * M_PI).epsilon(1e-12));
  CHECK(per[2] == doctest::Approx(4 * M_PI * M_PI).epsilon(1e-12));
  CHECK(per[3] == doctest::Approx(16 * M_PI * M_PI).epsilon(1e-12));

  const auto anti = hill_matrix_eigenvalues(zero, Periodicity::antiperiodic, 16);
  CHECK(anti[0] == doctest::Approx(M_PI * M_PI).epsilon(1e-12));
  CHECK(anti[1] == doctest::Approx(M_PI * M_PI).epsilon(1e-12));
  CHECK(anti[2] == doctest::Approx(9 * M_PI * M_PI).epsilon(1e-12));

  CHECK_THROWS_AS(hill_matrix_eigenvalues(make_potential({1.0}, {0.0}), Periodicity::periodic, 3),
                  std::invalid_argument);
}

TEST_CASE("hill matrix: first antiperiodic splitting and truncation convergence") {
  const Potential q = make_potential({2.0}, {0.0});
  const auto a32 = hill_matrix_eigenvalues(q, Periodicity::antiperiodic, 32);
  const auto a64 = hill_matrix_eigenvalues(q, Periodicity::antiperiodic, 64);
  CHECK(a32[0] < M_PI * M_PI);
  CHECK(a32[1] > M_PI * M_PI);
  // first-order splitting = 2 |\hat q_1| = 2
  CHECK(a32[1] - a32[0] == doctest::Approx(2.0).epsilon(0.2));
  for (int i = 0; i < 8; ++i) {
    CHECK(a32[i] == doctest::Approx(a64[i]).epsilon(1e-12));
  }
}

TEST_CASE("band edges: free operator") {
  const auto spec = band_edges(make_potential({}, {}), 5, 1e-12);
  CHECK(std::abs(spec.q0) < 1e-10);
  CHECK(spec.N == 5);
  for (const auto& g : spec.gaps) {
    CHECK(g.closed);
    CHECK(g.h == 0.0);
    const double expected = M_PI * M_PI * g.n * g.n;
    CHECK(g.lambda_minus == doctest::Approx(expected).epsilon(1e-9));
    CHECK(g.lambda_plus == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("band edges: perturbative splitting of the first gap") {
  const double eps = 0.1;
  const auto spec = band_edges(make_potential({eps}, {0.0}), 2, 1e-12);
  const auto& g1 = spec.gaps[0];
  CHECK(!g1.closed);
  CHECK(g1.gamma_len / eps == doctest::Approx(1.0).epsilon(0.1));
  // independent matrix oracle at doubled truncation
  const auto anti = hill_matrix_eigenvalues(make_potential({eps}, {0.0}),
                                            Periodicity::antiperiodic, 64);
  CHECK(g1.gamma_len == doctest::Approx(anti[1] - anti[0]).epsilon(1e-8));
}

TEST_CASE("dual-route edges against the doubled-truncation matrix") {
  const auto corpus = corpus_potentials(kCorpusSeed);
  for (const Potential& q :
       {make_potential({2.0}, {0.0}), make_potential({2.0, 1.0}, {0.0, 0.0}), corpus[9]}) {
    const auto spec = band_edges(q, 8, 1e-12);
    const auto per = hill_matrix_eigenvalues(q, Periodicity::periodic, 128);
    const auto anti = hill_matrix_eigenvalues(q, Periodicity::antiperiodic, 128);
    for (int n = 1; n <= 8; ++n) {
      const double lo = (n % 2 == 1) ? anti[n - 1] : per[n - 1];
      const double hi = (n % 2 == 1) ? anti[n] : per[n];
      const auto& g = spec.gaps[n - 1];
      CHECK(std::abs(g.lambda_minus + spec.mu0 - lo) <= 1e-8 * std::max(1.0, std::abs(lo)));
      CHECK(std::abs(g.lambda_plus + spec.mu0 - hi) <= 1e-8 * std::max(1.0, std::abs(hi)));
    }
  }
}

TEST_CASE("translation invariance of the spectrum") {
  const auto corpus = corpus_potentials(kCorpusSeed);
  const Potential& q = corpus[5];
  const auto a = band_edges(q, 4, 1e-12);
  const auto b = band_edges(translated(q, 0.3), 4, 1e-12);
  CHECK(a.q0 == doctest::Approx(b.q0).epsilon(1e-9));
  for (int n = 0; n < 4; ++n) {
    CHECK(std::abs(a.edges[n].first - b.edges[n].first) <=
          1e-9 * std::max(1.0, std::abs(a.edges[n].first)));
    CHECK(std::abs(a.edges[n].second - b.edges[n].second) <=
          1e-9 * std::max(1.0, std::abs(a.edges[n].second)));
  }
}

TEST_CASE("emitted spectra satisfy interlacing and the edge equations") {
  const auto corpus = corpus_potentials(kCorpusSeed);
  for (const Potential* q : {&corpus[0], &corpus[6]}) {
    SpectrumOptions opt;  // adaptive
    const auto spec = band_edges(*q, opt);
    double prev_plus = 0.0;
    for (const auto& g : spec.gaps) {
      CHECK(g.lambda_minus > prev_plus);
      CHECK(g.lambda_minus <= g.lambda_plus);
      CHECK(g.rho >= -1e-9);
      CHECK(g.z_minus <= g.z_crit);
      CHECK(g.z_crit <= g.z_plus);
      // |gamma| = |g|(z+ + z-) to rounding
      if (!g.closed) {
        CHECK(g.gamma_len ==
              doctest::Approx(g.g_len * (g.z_plus + g.z_minus)).epsilon(1e-10));
      }
      const double parity = (g.n % 2 == 0) ? 1.0 : -1.0;
      for (double lam : {g.lambda_minus, g.lambda_plus}) {
        CHECK(std::abs(parity * spec.delta_shifted(lam).delta - 1.0) < 1e-9);
      }
      prev_plus = g.lambda_plus;
    }
  }
}

TEST_CASE("gap critical point") {
  const Potential q = make_potential({2.0}, {0.0});
  const auto spec = band_edges(q, 3, 1e-12);
  const auto [zc, h] = gap_critical_point(q, spec, 1);
  const auto& g1 = spec.gaps[0];
  CHECK(zc > g1.z_minus);
  CHECK(zc < g1.z_plus);
  CHECK(h > 0.0);
  // golden-section oracle on (-1)^n Delta(z^2)
  const double zc_oracle = oracles::golden_section_max(
      [&](double z) { return -spec.delta_shifted(z * z).delta; }, g1.z_minus, g1.z_plus);
  // the oracle locates the flat maximum to ~sqrt(eval noise / curvature)
  CHECK(zc == doctest::Approx(zc_oracle).epsilon(3e-7));
  CHECK(v_on_gap(q, spec, 1, zc_oracle) <= h * (1.0 + 1e-12));

  // |g_n| <= 2 h_n on the discriminant-resolved open gaps
  for (const auto& g : spec.gaps) {
    if (g.closed || !g.delta_refined) continue;
    CHECK(g.g_len <= 2.0 * g.h * (1.0 + 1e-10));
  }

  // closed gap: precondition violation
  const auto free_spec = band_edges(make_potential({}, {}), 2, 1e-12);
  CHECK_THROWS_AS(gap_critical_point(make_potential({}, {}), free_spec, 1),
                  std::invalid_argument);
}

TEST_SUITE_END();
