#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "empc/dp.hpp"

using namespace empc;

namespace {

const double kPhi = 0.5 * (1.0 + std::sqrt(5.0));       // stabilizing Riccati root
const double kPhiMinus = 0.5 * (1.0 - std::sqrt(5.0));  // antistabilizing root

struct LqBundle {
  ModelInstance model = make_model("lq");
  GridBundle grids = default_grids(model);
  SolveConfig cfg;
  ValueSolution vplus, vminus;
  CalibrationReport cal;
  double p = 0.0;

  LqBundle() {
    vplus = solve_forward(model, grids, cfg);
    vminus = solve_backward(model, grids, cfg);
    p = calibrate_penalty(model, grids, cfg, vplus, vminus, &cal);
  }
};

LqBundle& lq() {
  static LqBundle bundle;
  return bundle;
}

double value_at(const ValueSolution& sol, double x) {
  return interpolate(sol.value, scalar_vec(x));
}

}  // namespace

TEST_CASE("lq forward value matches the scalar Riccati solution") {
  auto& b = lq();
  REQUIRE(b.vplus.converged);
  CHECK(b.vplus.residual <= b.cfg.tol);
  CHECK(value_at(b.vplus, 0.0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(value_at(b.vplus, 1.0) - kPhi) <= 2e-2);
  for (int i = 0; i < b.grids.state.total; ++i) {
    const double x = b.grids.state.point(i)[0];
    if (std::abs(x) > 1.5) continue;
    CHECK(std::abs(b.vplus.value.values[i] - kPhi * x * x) <= 2e-2);
  }
  CHECK(b.vplus.domain_mask[b.grids.state.origin_flat()] == 1);
}

TEST_CASE("lq backward value matches the antistabilizing Riccati root") {
  auto& b = lq();
  REQUIRE(b.vminus.converged);
  CHECK(value_at(b.vminus, 0.0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(value_at(b.vminus, 0.5) - kPhiMinus * 0.25) <= 5e-3);
  for (int i = 0; i < b.grids.state.total; ++i) {
    const double x = b.grids.state.point(i)[0];
    CHECK(b.vminus.value.values[i] <= 1e-12);   // l >= 0 forces V- <= 0
    CHECK(b.vplus.value.values[i] >= -1e-12);   // and V+ >= 0
    if (std::abs(x) > 0.6) continue;
    CHECK(std::abs(b.vminus.value.values[i] - kPhiMinus * x * x) <= 2e-2);
  }
}

TEST_CASE("converged fields satisfy the Bellman equation on the grid") {
  auto& b = lq();
  BellmanTable fwd = make_forward_table(b.model, b.grids);
  CHECK(bellman_residual(fwd, b.vplus.value.values) <= 2.0 * b.cfg.tol);
  // Backward Bellman inequality: V-(f(x,u)) >= -l(x,u) + V-(x).
  double worst = 0.0;
  for (int i = 0; i < b.grids.state.total; i += 7) {
    const Vec x = b.grids.state.point(i);
    for (int j = 0; j < b.grids.control.total; j += 5) {
      const Vec u = b.grids.control.point(j);
      if (!admissible(b.model, x, u)) continue;
      const Vec y = eval_dynamics(b.model, x, u);
      const double vy = interpolate(b.vminus.value, y);
      if (!std::isfinite(vy)) continue;
      const double rhs = -b.model.cost.eval(x, u) + b.vminus.value.values[i];
      worst = std::max(worst, rhs - vy);
    }
  }
  CHECK(worst <= 1e-2);  // within interpolation error
}

TEST_CASE("relaxed solves and penalty calibration") {
  auto& b = lq();
  const ValueSolution& vop = b.cal.forward_relaxed;
  const ValueSolution& vom = b.cal.backward_relaxed;
  REQUIRE(vop.converged);
  REQUIRE(vom.converged);
  CHECK(interpolate(vop.value, scalar_vec(0.0)) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(interpolate(vom.value, scalar_vec(0.0)) == doctest::Approx(0.0).epsilon(1e-9));

  // Exactness at the calibrated penalty, the sandwich, and sign structure.
  for (int i = 0; i < b.grids.state.total; ++i) {
    if (b.vplus.masked(i)) {
      CHECK(std::abs(vop.value.values[i] - b.vplus.value.values[i]) <= 10 * b.cfg.tol);
      CHECK(vop.value.values[i] <= b.vplus.value.values[i] + 10 * b.cfg.tol);
    }
    if (b.vminus.masked(i)) {
      CHECK(std::abs(vom.value.values[i] - b.vminus.value.values[i]) <= 10 * b.cfg.tol);
      CHECK(vom.value.values[i] >= b.vminus.value.values[i] - 10 * b.cfg.tol);
    }
    CHECK(vom.value.values[i] <= vop.value.values[i] + 10 * b.cfg.tol);
    // lq stage cost is nonnegative, so V_ominus <= 0 everywhere.
    CHECK(vom.value.values[i] <= 10 * b.cfg.tol);
  }

  // V_oplus is pointwise nondecreasing in p.
  ValueSolution lo = solve_forward_relaxed(b.model, b.grids, b.cfg, 1.0);
  ValueSolution hi = solve_forward_relaxed(b.model, b.grids, b.cfg, 4.0);
  for (int i = 0; i < b.grids.state.total; ++i) {
    CHECK(lo.value.values[i] <= hi.value.values[i] + 10 * b.cfg.tol);
  }
}

TEST_CASE("zero stage cost needs no penalty") {
  ModelInstance free = make_model("lq");
  free.name = "lq-free";
  free.cost.eval = [](const Vec&, const Vec&) { return 0.0; };
  GridBundle g = make_grids(free, {41}, {21});
  SolveConfig cfg;
  ValueSolution vp = solve_forward(free, g, cfg);
  ValueSolution vo = solve_forward_relaxed(free, g, cfg, 1.0);
  for (int i = 0; i < g.state.total; ++i) {
    if (!vp.masked(i)) continue;
    CHECK(std::abs(vp.value.values[i]) <= 10 * cfg.tol);
    CHECK(std::abs(vo.value.values[i]) <= 10 * cfg.tol);
  }
}

TEST_CASE("finite-horizon value iteration") {
  auto& b = lq();
  // Terminal = V+ is a fixed point of the backup.
  auto fixed = value_iterate_finite(b.model, b.grids, b.vplus.value, 5);
  for (const auto& level : fixed) {
    for (int i = 0; i < b.grids.state.total; ++i) {
      if (!b.vplus.masked(i)) continue;
      CHECK(std::abs(level.value.values[i] - b.vplus.value.values[i]) <= 10 * b.cfg.tol);
    }
  }

  // Terminal = origin indicator: one step reaches 0 only from |x| <= 1 at
  // cost 2x^2 (the input -x is forced).
  ExtendedField indicator = make_field(b.grids.state, kInf, "indicator");
  indicator.values[b.grids.state.origin_flat()] = 0.0;
  auto one = value_iterate_finite(b.model, b.grids, indicator, 1);
  for (int i = 0; i < b.grids.state.total; ++i) {
    const double x = b.grids.state.point(i)[0];
    const double v = one.front().value.values[i];
    if (std::abs(x) <= 1.0 + 1e-12) {
      CHECK(std::abs(v - 2.0 * x * x) <= 1e-9);
    } else {
      CHECK(v == kInf);
    }
  }

  // The indicator sequence is pointwise nonincreasing and reaches V+.
  auto seq = value_iterate_finite(b.model, b.grids, indicator, 40);
  for (size_t n = 1; n < seq.size(); ++n) {
    for (int i = 0; i < b.grids.state.total; ++i) {
      CHECK(seq[n].value.values[i] <= seq[n - 1].value.values[i] + 1e-12);
    }
  }
  double end_gap = 0.0;
  for (int i = 0; i < b.grids.state.total; ++i) {
    if (!b.vplus.masked(i)) continue;
    end_gap = std::max(end_gap,
                       std::abs(seq.back().value.values[i] - b.vplus.value.values[i]));
  }
  CHECK(end_gap <= 10 * b.cfg.tol);
}

TEST_CASE("value iteration stays monotone once it becomes monotone") {
  auto& b = lq();
  // Start from a field below V+ (zero everywhere): the sequence may reorder
  // early, but once a level dominates its predecessor it keeps doing so.
  ExtendedField zero = make_field(b.grids.state, 0.0, "zero");
  auto seq = value_iterate_finite(b.model, b.grids, zero, 12);
  auto dominates = [&](const ValueSolution& a, const ValueSolution& bl) {
    for (int i = 0; i < b.grids.state.total; ++i) {
      if (a.value.values[i] < bl.value.values[i] - 1e-9) return false;
    }
    return true;
  };
  int first_monotone = -1;
  for (size_t n = 1; n < seq.size(); ++n) {
    if (dominates(seq[n], seq[n - 1])) {
      first_monotone = static_cast<int>(n);
      break;
    }
  }
  REQUIRE(first_monotone >= 1);
  for (size_t n = first_monotone; n + 1 < seq.size(); ++n) {
    CHECK(dominates(seq[n + 1], seq[n]));
  }
}

TEST_CASE("cost-to-travel identities") {
  auto& b = lq();
  TravelReport rep;
  CHECK(cost_to_travel(b.model, b.grids, scalar_vec(0.0), scalar_vec(0.0), 0, false, 0.0,
                       b.cfg, &rep) == 0.0);
  CHECK(cost_to_travel(b.model, b.grids, scalar_vec(0.0), scalar_vec(0.0), 7, false, 0.0,
                       b.cfg) == 0.0);
  CHECK(cost_to_travel(b.model, b.grids, scalar_vec(1.0), scalar_vec(0.0), 1, false, 0.0,
                       b.cfg) == doctest::Approx(2.0).epsilon(1e-12));

  for (double x : {-4.0, -1.5, 0.5, 3.0, 8.0}) {
    const double c_fwd = cost_to_travel(b.model, b.grids, scalar_vec(x), scalar_vec(0.0),
                                        kInfiniteHorizon, false, 0.0, b.cfg);
    CHECK(std::abs(c_fwd - value_at(b.vplus, x)) <= 10 * b.cfg.tol);
    const double c_bwd = cost_to_travel(b.model, b.grids, scalar_vec(0.0), scalar_vec(x),
                                        kInfiniteHorizon, false, 0.0, b.cfg);
    CHECK(std::abs(c_bwd + value_at(b.vminus, x)) <= 10 * b.cfg.tol);
  }

  // A target just outside the box snaps to the boundary node with a warning.
  cost_to_travel(b.model, b.grids, scalar_vec(0.0), scalar_vec(10.06), 3, false, 0.0, b.cfg,
                 &rep);
  CHECK(rep.snapped);
  CHECK(rep.snap_distance_cells > 0.5);
  CHECK_THROWS_AS(cost_to_travel(b.model, b.grids, scalar_vec(11.0), scalar_vec(0.0), 3,
                                 false, 0.0, b.cfg),
                  ContractViolation);
}

TEST_CASE("optimal horizon split") {
  auto& b = lq();
  auto at_origin = optimal_split(b.model, b.grids, scalar_vec(0.0), 6, b.p, b.cfg);
  CHECK(at_origin.M == 1);  // tie-break toward the smaller split
  CHECK(std::abs(at_origin.value) <= 10 * b.cfg.tol);

  const Vec x = scalar_vec(1.0);
  const double bound =
      value_at(b.vplus, 1.0) - interpolate(b.cal.backward_relaxed.value, x);
  double prev = kInf;
  for (int n : {4, 8, 16}) {
    auto split = optimal_split(b.model, b.grids, x, n, b.p, b.cfg);
    CHECK(split.value >= bound - 10 * b.cfg.tol);
    CHECK(split.value <= prev + 1e-9);  // nonincreasing in the horizon
    prev = split.value;
  }

  // From x = 9 a three-step horizon cannot reach the origin at all.
  CHECK_THROWS_AS(optimal_split(b.model, b.grids, scalar_vec(9.0), 3, b.p, b.cfg),
                  InfeasibleSplit);
}

TEST_CASE("policies and continuous-state policy queries") {
  auto& b = lq();
  const int node = b.grids.state.nearest_flat(scalar_vec(1.0));
  auto u = policy_control(b.vplus, b.grids.control, node);
  REQUIRE(u);
  CHECK(std::abs((*u)[0] + 1.0 / kPhi) <= 0.06);  // LQR gain within one spacing

  auto uc = forward_policy_at(b.model, b.grids, b.vplus.value, scalar_vec(0.8));
  REQUIRE(uc);
  CHECK(std::abs((*uc)[0] + 0.8 / kPhi) <= 0.06);

  auto ub = backward_policy_at(b.model, b.grids, b.vminus.value, scalar_vec(0.5));
  REQUIRE(ub);
  // The backward-optimal input into x satisfies u = x / phi.
  CHECK(std::abs((*ub)[0] - 0.5 / kPhi) <= 0.06);
}

TEST_CASE("solves are deterministic") {
  auto& b = lq();
  ValueSolution again = solve_forward(b.model, b.grids, b.cfg);
  REQUIRE(again.value.values.size() == b.vplus.value.values.size());
  for (size_t i = 0; i < again.value.values.size(); ++i) {
    CHECK(again.value.values[i] == b.vplus.value.values[i]);
    CHECK(again.policy[i] == b.vplus.policy[i]);
  }
}
