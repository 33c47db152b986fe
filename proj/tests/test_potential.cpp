#include <doctest.h>

#include <cmath>

#include "kdvact/potential.hpp"
#include "kdvact/verify.hpp"
#include "oracles.hpp"

using namespace kdvact;

TEST_SUITE_BEGIN("potential");

TEST_CASE("construction, trimming and validation") {
  const Potential zero = make_potential({}, {});
  CHECK(zero.modes() == 0);

  const Potential q1 = make_potential({2.0}, {0.0});
  CHECK(q1.modes() == 1);

  const Potential q2 = make_potential({0.0, 1.5}, {0.5, 0.0});
  CHECK(q2.modes() == 2);

  CHECK(make_potential({1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}).modes() == 1);

  CHECK_THROWS_AS(make_potential({1.0, 2.0}, {0.0}), std::invalid_argument);
  try {
    make_potential({1.0, std::nan("")}, {0.0, 0.0});
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("mode 2") != std::string::npos);
  }
}

TEST_CASE("pointwise evaluation") {
  const Potential zero = make_potential({}, {});
  CHECK(zero(0.3) == 0.0);

  const Potential q = make_potential({2.0}, {0.0});
  CHECK(q(0.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(q(0.25)) < 1e-14);  // cos(pi/2)
  CHECK(q(1.37) == doctest::Approx(q(0.37)).epsilon(1e-13));

  const Potential mix = make_potential({0.0, 1.5}, {0.5, 0.0});
  const double x = 0.183;
  CHECK(mix(x) ==
        doctest::Approx(1.5 * std::cos(4 * M_PI * x) + 0.5 * std::sin(2 * M_PI * x)).epsilon(1e-14));
  CHECK(mix.derivative(x) ==
        doctest::Approx(-6 * M_PI * std::sin(4 * M_PI * x) + M_PI * std::cos(2 * M_PI * x))
            .epsilon(1e-13));
}

TEST_CASE("direct functionals: closed forms") {
  const auto fz = direct_functionals(make_potential({}, {}));
  CHECK(fz.h1 == 0.0);
  CHECK(fz.h2 == 0.0);
  CHECK(fz.sup_q == 0.0);

  // q = 2 cos 2 pi x: h1 = 2, cubic integrates to zero, h2 = 4 pi^2
  const auto f = direct_functionals(make_potential({2.0}, {0.0}));
  CHECK(f.h1 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(f.h2 == doctest::Approx(4.0 * M_PI * M_PI).epsilon(1e-14));
  CHECK(f.norm_q == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(f.sup_q == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("direct functionals vs trapezoid oracle") {
  // nonzero cubic term
  const Potential q = make_potential({2.0, 1.0}, {0.0, 0.0});
  const auto f = direct_functionals(q);
  const auto t = oracles::trapezoid_functionals(q, 1 << 14);
  CHECK(f.h1 == doctest::Approx(t.h1).epsilon(1e-12));
  CHECK(f.h2 == doctest::Approx(t.h2).epsilon(1e-12));

  // generic potential with sines
  const Potential g = make_potential({0.7, -1.2, 0.4}, {-0.3, 0.8, 1.1});
  const auto fg = direct_functionals(g);
  const auto tg = oracles::trapezoid_functionals(g, 1 << 14);
  CHECK(fg.h1 == doctest::Approx(tg.h1).epsilon(1e-12));
  CHECK(fg.h2 == doctest::Approx(tg.h2).epsilon(1e-12));

  // trapezoid is already exact at 3M + 1 nodes for trigonometric polynomials
  const auto t3 = oracles::trapezoid_functionals(g, 3 * g.modes() + 1);
  CHECK(fg.h1 == doctest::Approx(t3.h1).epsilon(1e-12));
  CHECK(fg.h2 == doctest::Approx(t3.h2).epsilon(1e-12));
}

TEST_CASE("translation invariance of the functionals") {
  const Potential q = make_potential({1.1, -0.6}, {0.4, 0.9});
  const Potential qs = translated(q, 0.37);
  const auto a = direct_functionals(q);
  const auto b = direct_functionals(qs);
  CHECK(a.h1 == doctest::Approx(b.h1).epsilon(1e-13));
  CHECK(a.h2 == doctest::Approx(b.h2).epsilon(1e-12));
  CHECK(a.sup_q == doctest::Approx(b.sup_q).epsilon(1e-9));
  const double x = 0.21;
  CHECK(qs(x) == doctest::Approx(q(x + 0.37)).epsilon(1e-13));
}

TEST_CASE("sobolev bound on the sup norm holds on the corpus") {
  for (const auto& q : corpus_potentials(kCorpusSeed)) {
    const auto f = direct_functionals(q);
    CHECK(f.sup_q <= f.norm_qprime / std::sqrt(2.0) + 1e-12);
  }
}

TEST_CASE("shifted hamiltonian") {
  const Potential q = make_potential({1.3, 0.4}, {-0.2, 0.7});
  const double c = 0.31;
  // oracle: trapezoid of the shifted potential directly
  const int n = 1 << 14;
  double sp = 0, s3 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / n;
    const double d = q.derivative(x);
    const double v = q(x) + c;
    sp += d * d;
    s3 += v * v * v;
  }
  const double oracle = 0.5 * (sp / n + 2.0 * s3 / n);
  CHECK(shifted_hamiltonian(q, c) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("negative-order norm closed form") {
  // single cosine mode: ||q||_{-1} = |a1| / (2 pi)
  CHECK(sobolev_minus1_norm(make_potential({2.0}, {0.0})) ==
        doctest::Approx(2.0 / (2.0 * M_PI)).epsilon(1e-14));
}

TEST_SUITE_END();
