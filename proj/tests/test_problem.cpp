#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "permrate/problem.hpp"
#include "permrate/rng.hpp"

using namespace permrate;

TEST_CASE("two-sample problems keep stable sample-first ordering") {
  std::vector<double> x = {0.1, 0.2, 0.3}, y = {10, 20, 30};
  std::vector<int> g = {1, 2, 1};
  ProblemConfig cfg;
  cfg.kind = ProblemKind::two_sample_mean;
  cfg.point = 0.2;
  Problem p = build_problem(cfg, x, y, {}, g);
  CHECK(p.n1 == 2);
  CHECK(p.n2() == 1);
  CHECK(p.x == std::vector<double>{0.1, 0.3, 0.2});
  CHECK(p.y == std::vector<double>{10, 30, 20});
  CHECK(p.labels == std::vector<std::uint8_t>{1, 2, 1});
  CHECK(p.eval_x == 0.2);
  CHECK(p.side == EvalSide::interior);
  CHECK(p.delta0() == 0.0);
}

TEST_CASE("rdd problems split by cutoff side and reflect the left sample") {
  std::vector<double> x = {-1, 2, -3, 4}, y = {10, 20, 30, 40};
  ProblemConfig cfg;
  cfg.kind = ProblemKind::rdd_mean;
  cfg.point = 0.0;
  Problem p = build_problem(cfg, x, y);
  CHECK(p.labels == std::vector<std::uint8_t>{2, 1, 2, 1});
  CHECK(p.n1 == 2);
  CHECK(p.x == std::vector<double>{2, 4, 1, 3});
  CHECK(p.y == std::vector<double>{20, 40, 10, 30});
  CHECK(p.side == EvalSide::boundary_right);
  CHECK(p.eval_x == 0.0);

  // Nonzero cutoff: both sides centered, observations at the cutoff treated.
  std::vector<double> xc = {0.5, 1.0, 1.5}, yc = {1, 2, 3};
  cfg.point = 1.0;
  Problem pc = build_problem(cfg, xc, yc);
  CHECK(pc.labels == std::vector<std::uint8_t>{2, 1, 1});
  CHECK(pc.x == std::vector<double>{0.0, 0.5, 0.5});
  CHECK(pc.y == std::vector<double>{2, 3, 1});
}

TEST_CASE("density problems halve the rows and negate the second half") {
  std::vector<double> x = {0.3, -0.1, 0.2, 0.5, -0.4};
  ProblemConfig cfg;
  cfg.kind = ProblemKind::density_jump;
  Problem p = build_problem(cfg, x);
  CHECK(p.n1 == 2);
  CHECK(p.n2() == 3);
  CHECK(p.labels == std::vector<std::uint8_t>{1, 1, 2, 2, 2});
  CHECK(p.x == std::vector<double>{0.3, -0.1, -0.2, -0.5, 0.4});
  CHECK(p.y.empty());
  CHECK(p.delta0() == 1.0);

  // A nonzero jump location shifts before negating.
  cfg.point = 0.1;
  Problem ps = build_problem(cfg, x);
  CHECK(ps.x[0] == doctest::Approx(0.2));
  CHECK(ps.x[2] == doctest::Approx(-0.1));
}

TEST_CASE("degenerate splits and malformed columns are rejected") {
  ProblemConfig twos;
  twos.kind = ProblemKind::two_sample_mean;
  std::vector<double> x = {1, 2}, y = {3, 4};
  std::vector<int> ones = {1, 1}, bad = {1, 3};
  CHECK_THROWS_AS(build_problem(twos, x, y, {}, ones), DegenerateSplitError);
  CHECK_THROWS_AS(build_problem(twos, x, y, {}, bad), ConfigError);
  CHECK_THROWS_AS(build_problem(twos, x, y), ConfigError);          // missing groups
  CHECK_THROWS_AS(build_problem(twos, x, std::vector<double>{1}, {}, std::vector<int>{1, 2}), ConfigError);
  CHECK_THROWS_AS(build_problem(twos, {}), ConfigError);

  ProblemConfig rdd;
  rdd.kind = ProblemKind::rdd_mean;
  std::vector<double> onesided = {0.5, 1.5};
  CHECK_THROWS_AS(build_problem(rdd, onesided, y), DegenerateSplitError);

  ProblemConfig dens;
  dens.kind = ProblemKind::density_jump;
  CHECK_THROWS_AS(build_problem(dens, std::vector<double>{0.7}), DegenerateSplitError);

  ProblemConfig quant;
  quant.kind = ProblemKind::two_sample_quantile;
  quant.quantile = 1.0;
  std::vector<int> g = {1, 2};
  CHECK_THROWS_AS(build_problem(quant, x, y, {}, g), ConfigError);

  ProblemConfig ratio;
  ratio.kind = ProblemKind::two_sample_ratio;
  CHECK_THROWS_AS(build_problem(ratio, x, y, {}, g), ConfigError);  // missing y2

  ProblemConfig nan_cfg;
  nan_cfg.kind = ProblemKind::density_jump;
  std::vector<double> xnan = {0.1, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(build_problem(nan_cfg, xnan), ConfigError);
}

TEST_CASE("delta transformations shift sample one only") {
  ProblemConfig cfg;
  cfg.kind = ProblemKind::two_sample_mean;
  std::vector<double> x = {0.1, 0.2, 0.3, 0.4}, y = {3, 5, 7, 9};
  std::vector<int> g = {1, 1, 2, 2};
  Problem p = build_problem(cfg, x, y, {}, g);

  Problem shifted = apply_delta(p, 2.0);
  CHECK(shifted.y == std::vector<double>{1, 3, 7, 9});
  CHECK(shifted.x == p.x);

  // The identity delta returns the data bitwise unchanged.
  Problem same = apply_delta(p, 0.0);
  CHECK(same.y == p.y);
  CHECK(same.x == p.x);

  // Round trip within floating-point slack.
  Problem back = apply_delta(shifted, -2.0);
  for (std::size_t i = 0; i < p.y.size(); ++i) CHECK(back.y[i] == doctest::Approx(p.y[i]).epsilon(1e-12));
}

TEST_CASE("density delta scales the two signs reciprocally") {
  ProblemConfig cfg;
  cfg.kind = ProblemKind::density_jump;
  std::vector<double> x = {0.5, -0.5, 0.3, -0.3};
  Problem p = build_problem(cfg, x);
  // Canonical sample 1 holds {0.5, -0.5}; the transform scales the
  // nonnegative value up and the negative value down.
  Problem t = apply_delta(p, 2.0);
  CHECK(t.x[0] == doctest::Approx(1.0));
  CHECK(t.x[1] == doctest::Approx(-0.25));
  CHECK(t.x[2] == p.x[2]);
  CHECK(t.x[3] == p.x[3]);

  Problem same = apply_delta(p, 1.0);
  CHECK(same.x == p.x);

  Problem back = apply_delta(t, 0.5);
  for (std::size_t i = 0; i < p.x.size(); ++i) CHECK(back.x[i] == doctest::Approx(p.x[i]).epsilon(1e-12));

  CHECK_THROWS_AS(apply_delta(p, 0.0), InvalidDeltaError);
  CHECK_THROWS_AS(apply_delta(p, -1.0), InvalidDeltaError);
}

TEST_CASE("ratio delta shifts the numerator against the denominator") {
  ProblemConfig cfg;
  cfg.kind = ProblemKind::two_sample_ratio;
  std::vector<double> x = {0.1, 0.2}, y = {6, 8}, y2 = {2, 4};
  std::vector<int> g = {1, 2};
  Problem p = build_problem(cfg, x, y, y2, g);
  Problem t = apply_delta(p, 0.5);
  CHECK(t.y[0] == doctest::Approx(5.0));  // 6 - 0.5*2
  CHECK(t.y[1] == doctest::Approx(8.0));  // sample 2 untouched
  CHECK(t.y2 == p.y2);
}

TEST_CASE("rdd built from sign-symmetric data splits into identical samples") {
  SubstreamRng rng{20240816u, 30u};
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    const double a = 0.01 + rng.next_uniform();
    const double v = rng.next_normal();
    x.push_back(a);
    y.push_back(v);
    x.push_back(-a);
    y.push_back(v);
  }
  ProblemConfig cfg;
  cfg.kind = ProblemKind::rdd_mean;
  Problem p = build_problem(cfg, x, y);
  REQUIRE(p.n1 == p.n2());

  auto tuples = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = lo; i < hi; ++i) out.emplace_back(p.x[i], p.y[i]);
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(tuples(0, p.n1) == tuples(p.n1, p.n()));
}

TEST_CASE("problem kind strings round trip") {
  for (ProblemKind k : {ProblemKind::two_sample_mean, ProblemKind::two_sample_quantile,
                        ProblemKind::two_sample_ratio, ProblemKind::rdd_mean, ProblemKind::density_jump})
    CHECK(problem_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(problem_kind_from_string("anova"), ConfigError);
}
