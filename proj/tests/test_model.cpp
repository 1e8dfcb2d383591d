#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "empc/model.hpp"

using namespace empc;

TEST_CASE("registry lists the shipped models") {
  auto models = list_models();
  REQUIRE(models.size() >= 3);
  bool has_lq = false, has_wide = false, has_nonlinear = false;
  for (const auto& m : models) {
    has_lq = has_lq || m.name == "lq";
    has_wide = has_wide || m.name == "lq-wide";
    has_nonlinear = has_nonlinear || m.name == "nonlinear";
  }
  CHECK(has_lq);
  CHECK(has_wide);
  CHECK(has_nonlinear);
}

TEST_CASE("forward dynamics") {
  ModelInstance lq = make_model("lq");
  CHECK(eval_dynamics(lq, scalar_vec(2.0), scalar_vec(-1.0))[0] == doctest::Approx(1.0));
  CHECK(eval_dynamics(lq, scalar_vec(0.0), scalar_vec(0.0))[0] == 0.0);

  ModelInstance nl = make_model("nonlinear");
  Vec y = eval_dynamics(nl, make_vec({1.0, 2.0}), scalar_vec(0.5));
  CHECK(y[0] == doctest::Approx(5.0));
  CHECK(y[1] == doctest::Approx(2.5));
  Vec origin = eval_dynamics(nl, make_vec({0.0, 0.0}), scalar_vec(0.0));
  CHECK(origin.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(eval_dynamics(lq, make_vec({1.0, 2.0}), scalar_vec(0.0)),
                  ContractViolation);
}

TEST_CASE("inverse dynamics") {
  ModelInstance lq = make_model("lq");
  CHECK(eval_inverse_dynamics(lq, scalar_vec(1.0), scalar_vec(-1.0))[0] ==
        doctest::Approx(2.0));

  ModelInstance nl = make_model("nonlinear");
  Vec x = eval_inverse_dynamics(nl, make_vec({5.0, 2.5}), scalar_vec(0.5));
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(x[1] == doctest::Approx(2.0));
  Vec rt = eval_dynamics(nl, x, scalar_vec(0.5));
  CHECK(std::abs(rt[0] - 5.0) <= 1e-10);
  CHECK(std::abs(rt[1] - 2.5) <= 1e-10);

  Vec origin = eval_inverse_dynamics(nl, make_vec({0.0, 0.0}), scalar_vec(0.0));
  CHECK(origin.cwiseAbs().maxCoeff() <= 1e-12);

  ModelInstance no_inverse = nl;
  no_inverse.system.inverse_method = InverseMethod::unavailable;
  CHECK_THROWS_AS(eval_inverse_dynamics(no_inverse, make_vec({0.0, 0.0}), scalar_vec(0.0)),
                  ContractViolation);

  // Target far outside the inflated bracket has no solution.
  CHECK_THROWS_AS(eval_inverse_dynamics(nl, make_vec({500.0, 0.0}), scalar_vec(0.0)),
                  InversionFailure);
}

TEST_CASE("inverse round-trip on random forward images") {
  ModelInstance nl = make_model("nonlinear");
  std::mt19937 rng(20240811);
  std::uniform_real_distribution<double> x1(-2.0, 2.0), x2(-10.0, 10.0), uu(-10.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec x = make_vec({x1(rng), x2(rng)});
    Vec u = scalar_vec(uu(rng));
    Vec y = eval_dynamics(nl, x, u);
    Vec back = eval_inverse_dynamics(nl, y, u);
    Vec again = eval_dynamics(nl, back, u);
    worst = std::max(worst, (again - y).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("monotonicity premise of the scalar inverse") {
  // d/da [2a + (a-1)^3] must be positive over the inflated bracket.
  auto g = [](double a) { return 2.0 * a + std::pow(a - 1.0, 3); };
  for (double a = -4.0; a <= 4.0; a += 0.01) {
    const double slope = (g(a + 1e-6) - g(a - 1e-6)) / 2e-6;
    CHECK(slope > 0.0);
  }
}

TEST_CASE("origin verification") {
  auto lq = verify_origin_steady_state(make_model("lq"));
  CHECK(lq.pass);
  CHECK(lq.f_residual == 0.0);
  CHECK(lq.cost_residual == 0.0);

  auto nl = verify_origin_steady_state(make_model("nonlinear"));
  CHECK(nl.pass);
  CHECK(nl.f_residual == 0.0);
  CHECK(nl.cost_residual == 0.0);

  ModelInstance shifted = make_model("nonlinear");
  auto base = shifted.cost.eval;
  shifted.cost.eval = [base](const Vec& x, const Vec& u) { return base(x, u) + 1.0; };
  auto rep = verify_origin_steady_state(shifted);
  CHECK_FALSE(rep.pass);
  CHECK(rep.cost_residual == doctest::Approx(1.0));
}

TEST_CASE("admissibility") {
  ModelInstance lq = make_model("lq");
  CHECK(admissible(lq, scalar_vec(5.0), scalar_vec(0.5)));
  CHECK_FALSE(admissible(lq, scalar_vec(5.0), scalar_vec(1.5)));
  ModelInstance wide = make_model("lq-wide");
  CHECK(admissible(wide, scalar_vec(5.0), scalar_vec(1.5)));
}

TEST_CASE("construction rejects models that exclude the origin") {
  ModelOverrides bad;
  bad.state_lower = scalar_vec(1.0);
  CHECK_THROWS_AS(make_model("lq", bad), ContractViolation);
  CHECK_THROWS_AS(make_model("unknown-model"), ContractViolation);
}
