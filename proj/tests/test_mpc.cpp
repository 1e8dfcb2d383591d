#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "empc/dissipativity.hpp"
#include "empc/mpc.hpp"

using namespace empc;

namespace {

const double kPhi = 0.5 * (1.0 + std::sqrt(5.0));

struct LqBundle {
  ModelInstance model = make_model("lq");
  GridBundle grids = default_grids(model);
  SolveConfig cfg;
  ValueSolution vplus, vminus;
  CalibrationReport cal;

  LqBundle() {
    vplus = solve_forward(model, grids, cfg);
    vminus = solve_backward(model, grids, cfg);
    calibrate_penalty(model, grids, cfg, vplus, vminus, &cal);
  }
  const ExtendedField& vominus() const { return cal.backward_relaxed.value; }
};

LqBundle& lq() {
  static LqBundle bundle;
  return bundle;
}

}  // namespace

TEST_CASE("terminal cost construction") {
  auto& b = lq();
  ExtendedField vf2_full = build_terminal_cost(terminal_spec(TerminalKind::vf2, 1.0),
                                               &b.vplus.value, &b.vominus(), b.grids);
  ExtendedField vf2_zero = build_terminal_cost(terminal_spec(TerminalKind::vf2, 0.0),
                                               &b.vplus.value, &b.vominus(), b.grids);
  ExtendedField vf1_zero = build_terminal_cost(terminal_spec(TerminalKind::vf1, 0.0),
                                               &b.vplus.value, &b.vominus(), b.grids);
  ExtendedField indicator = build_terminal_cost(terminal_spec(TerminalKind::origin_indicator),
                                                nullptr, nullptr, b.grids);
  for (int i = 0; i < b.grids.state.total; ++i) {
    if (b.vplus.masked(i)) {
      CHECK(std::abs(vf2_full.values[i] - b.vplus.value.values[i]) <= 1e-9);
    }
    CHECK(vf2_zero.values[i] == vf1_zero.values[i]);  // both collapse to V_ominus
    if (i == b.grids.state.origin_flat()) {
      CHECK(indicator.values[i] == 0.0);
    } else {
      CHECK(indicator.values[i] == kInf);
    }
  }
  CHECK_THROWS_AS(build_terminal_cost(terminal_spec(TerminalKind::vf1, 1.0), nullptr,
                                      nullptr, b.grids),
                  ContractViolation);
  CHECK_THROWS_AS(build_terminal_cost(terminal_spec(TerminalKind::vf1, -1.0),
                                      &b.vplus.value, &b.vominus(), b.grids),
                  ContractViolation);

  // An amrit terminal masks the supplied field to the terminal box.
  TerminalCostSpec amrit = terminal_spec(TerminalKind::amrit);
  amrit.amrit_field = make_field(b.grids.state, 0.0, "quad");
  for (int i = 0; i < b.grids.state.total; ++i) {
    amrit.amrit_field.values[i] = kPhi * b.grids.state.point(i).squaredNorm();
  }
  amrit.terminal_lower = scalar_vec(-1.6);
  amrit.terminal_upper = scalar_vec(1.6);
  ExtendedField masked = build_terminal_cost(amrit, nullptr, nullptr, b.grids);
  for (int i = 0; i < b.grids.state.total; ++i) {
    const double x = b.grids.state.point(i)[0];
    if (std::abs(x) <= 1.6 + 1e-9) {
      CHECK(masked.values[i] == amrit.amrit_field.values[i]);
    } else {
      CHECK(masked.values[i] == kInf);
    }
  }
}

TEST_CASE("terminal decrease condition") {
  auto& b = lq();
  // The Riccati quadratic with its own feedback makes the decrease an
  // equality inside the box where the input stays admissible.
  ExtendedField vf = make_field(b.grids.state, 0.0, "vf");
  for (int i = 0; i < b.grids.state.total; ++i) {
    vf.values[i] = kPhi * b.grids.state.point(i).squaredNorm();
  }
  auto kappa = [](const Vec& x) { return Vec(-x / kPhi); };
  auto good = check_amrit_condition(b.model, b.grids, vf, kappa, scalar_vec(-1.6),
                                    scalar_vec(1.6), 1e-2);
  CHECK(good.pass);
  CHECK(good.nodes_checked > 0);
  CHECK(std::abs(good.max_decrease_margin) <= 1e-2);

  // An undersized quadratic fails the decrease condition.
  ExtendedField small = make_field(b.grids.state, 0.0, "vf_small");
  for (int i = 0; i < b.grids.state.total; ++i) {
    small.values[i] = 0.5 * b.grids.state.point(i).squaredNorm();
  }
  auto bad = check_amrit_condition(b.model, b.grids, small, kappa, scalar_vec(-1.6),
                                   scalar_vec(1.6), 1e-2);
  CHECK_FALSE(bad.pass);
  CHECK(bad.decrease_violations > 0);

  // V+ with its own greedy policy passes on the same box.
  auto greedy = [&](const Vec& x) {
    auto u = forward_policy_at(b.model, b.grids, b.vplus.value, x);
    return u ? *u : Vec(Vec::Zero(1));
  };
  auto vplus_ok = check_amrit_condition(b.model, b.grids, b.vplus.value, greedy,
                                        scalar_vec(-1.6), scalar_vec(1.6), 1e-2);
  CHECK(vplus_ok.pass);
}

TEST_CASE("receding-horizon feedback") {
  auto& b = lq();
  auto at_origin = mpc_feedback(b.model, b.grids, b.vplus.value, scalar_vec(0.0));
  REQUIRE(at_origin);
  CHECK(std::abs((*at_origin)[0]) <= 1e-12);

  auto lqr_like = mpc_feedback(b.model, b.grids, b.vplus.value, scalar_vec(0.5));
  REQUIRE(lqr_like);
  CHECK(std::abs((*lqr_like)[0] + 0.5 / kPhi) <= 0.06);

  // With terminal V_ominus the feedback replays backward-optimal inputs.
  ExtendedField vo_term = build_terminal_cost(terminal_spec(TerminalKind::v_ominus), nullptr,
                                              &b.vominus(), b.grids);
  const Vec x = scalar_vec(0.3);
  auto u = mpc_feedback(b.model, b.grids, vo_term, x);
  REQUIRE(u);
  auto u_minus = backward_policy_at(b.model, b.grids, b.vminus.value,
                                    eval_dynamics(b.model, x, *u));
  REQUIRE(u_minus);
  CHECK(std::abs((*u)[0] - (*u_minus)[0]) <= b.grids.control.axes[0].spacing + 1e-12);
}

TEST_CASE("closed-loop simulation") {
  auto& b = lq();
  auto rest = simulate_closed_loop(b.model, b.grids, b.vplus.value, scalar_vec(0.0));
  CHECK(rest.converged);
  CHECK(std::abs(rest.accumulated_cost) <= 1e-9);
  CHECK(!rest.infeasible_at);

  auto run = simulate_closed_loop(b.model, b.grids, b.vplus.value, scalar_vec(4.0));
  CHECK(run.converged);
  REQUIRE(run.trajectory.size() == run.inputs.size() + 1);
  for (size_t k = 0; k < run.inputs.size(); ++k) {
    const Vec y = eval_dynamics(b.model, run.trajectory[k], run.inputs[k]);
    CHECK((y - run.trajectory[k + 1]).cwiseAbs().maxCoeff() == 0.0);
  }

  // Terminal V_ominus is not stabilizing.
  ExtendedField vo_term = build_terminal_cost(terminal_spec(TerminalKind::v_ominus), nullptr,
                                              &b.vominus(), b.grids);
  auto diverging = simulate_closed_loop(b.model, b.grids, vo_term, scalar_vec(0.5));
  CHECK_FALSE(diverging.converged);
}

TEST_CASE("minimum stabilizing horizon with the exact terminal cost") {
  auto& b = lq();
  ExtendedField term = build_terminal_cost(terminal_spec(TerminalKind::v_plus),
                                           &b.vplus.value, nullptr, b.grids);
  auto ns = min_stabilizing_horizon(b.model, b.grids, term, b.vplus, 3);
  REQUIRE(ns);
  CHECK(*ns == 1);
}

TEST_CASE("convergence profiles") {
  auto& b = lq();
  ExtendedField vf2 = build_terminal_cost(terminal_spec(TerminalKind::vf2, 1.0),
                                          &b.vplus.value, &b.vominus(), b.grids);
  auto exact = convergence_profile(b.model, b.grids, vf2, b.vplus, 10);
  for (double gap : exact) CHECK(gap <= 10 * b.cfg.tol);

  ExtendedField indicator = build_terminal_cost(terminal_spec(TerminalKind::origin_indicator),
                                                nullptr, nullptr, b.grids);
  auto upper = convergence_profile(b.model, b.grids, indicator, b.vplus, 40);
  for (size_t n = 1; n < upper.size(); ++n) CHECK(upper[n] <= upper[n - 1] + 1e-12);
  CHECK(upper.back() <= 10 * b.cfg.tol);

  // The beta-composite lower sequence rises to V+.
  ExtendedField beta = build_terminal_cost(terminal_spec(TerminalKind::beta_composite),
                                           &b.vplus.value, &b.vominus(), b.grids);
  auto levels = value_iterate_finite(b.model, b.grids, beta, 40);
  const double slack = 1e-4;  // interpolation noise of one backup
  for (size_t n = 1; n < levels.size(); ++n) {
    for (int i = 0; i < b.grids.state.total; ++i) {
      if (!b.vplus.masked(i)) continue;
      CHECK(levels[n].value.values[i] >= levels[n - 1].value.values[i] - slack);
    }
  }
  double end_gap = 0.0;
  for (int i = 0; i < b.grids.state.total; ++i) {
    if (!b.vplus.masked(i)) continue;
    end_gap = std::max(end_gap,
                       std::abs(levels.back().value.values[i] - b.vplus.value.values[i]));
  }
  CHECK(end_gap <= 10 * b.cfg.tol);

  // Upper and lower sequences bracket the exact-terminal one level by level.
  auto mid = value_iterate_finite(b.model, b.grids, vf2, 40);
  ExtendedField ind_field = build_terminal_cost(terminal_spec(TerminalKind::origin_indicator),
                                                nullptr, nullptr, b.grids);
  auto upper_levels = value_iterate_finite(b.model, b.grids, ind_field, 40);
  for (size_t n = 0; n < mid.size(); ++n) {
    for (int i = 0; i < b.grids.state.total; ++i) {
      if (!b.vplus.masked(i)) continue;
      CHECK(mid[n].value.values[i] <= upper_levels[n].value.values[i] + slack);
      CHECK(mid[n].value.values[i] >= levels[n].value.values[i] - slack);
    }
  }
}

TEST_CASE("rotated finite-horizon value decreases along the closed loop") {
  auto& b = lq();
  auto lyap = policy_evaluation_quadratic(b.model, b.grids, b.vplus, b.cfg);
  REQUIRE_FALSE(lyap.diverged);
  Rotations rot = build_rotations(b.cal.forward_relaxed, b.cal.backward_relaxed, lyap.field);
  const double tol = certificate_tolerance(b.cfg.tol, b.vominus());

  ExtendedField term = build_terminal_cost(terminal_spec(TerminalKind::vf2, 0.5),
                                           &b.vplus.value, &b.vominus(), b.grids);
  auto levels = value_iterate_finite(b.model, b.grids, term, 2);
  const ExtendedField& v2 = levels.back().value;
  auto rotated_value = [&](const Vec& x) {
    return interpolate(v2, x) + interpolate(rot.l3.field, x);
  };
  for (double x0 : {-2.0, -0.6, 0.4, 1.8}) {
    auto sim = simulate_closed_loop(b.model, b.grids, levels.front().value, scalar_vec(x0));
    REQUIRE(sim.converged);
    for (size_t k = 0; k + 1 < sim.trajectory.size(); ++k) {
      const double a = rotated_value(sim.trajectory[k]);
      const double c = rotated_value(sim.trajectory[k + 1]);
      if (!std::isfinite(a) || !std::isfinite(c)) continue;
      CHECK(c - a <= tol - 0.5 * sim.trajectory[k].squaredNorm());
    }
  }
}
