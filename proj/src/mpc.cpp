#include "empc/mpc.hpp"

#include <cmath>

#include "empc/threads.hpp"

namespace empc {

namespace {

double default_beta(double a) {
  if (a == kInf) return 1.0;
  return a / (1.0 + a);
}

bool in_box(const Vec& x, const Vec& lo, const Vec& hi, double eps) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] < lo[k] - eps || x[k] > hi[k] + eps) return false;
  }
  return true;
}

}  // namespace

TerminalCostSpec terminal_spec(TerminalKind kind, double r) {
  TerminalCostSpec s;
  s.kind = kind;
  s.r = r;
  return s;
}

ExtendedField build_terminal_cost(const TerminalCostSpec& spec, const ExtendedField* v_plus,
                                  const ExtendedField* v_ominus, const GridBundle& grids) {
  const StateGrid& g = grids.state;
  auto need = [](const ExtendedField* f, const char* what) -> const ExtendedField& {
    if (!f) throw ContractViolation(std::string("build_terminal_cost: missing ") + what);
    return *f;
  };
  ExtendedField out = make_field(g, kInf, "terminal", FieldPolarity::min_type);
  switch (spec.kind) {
    case TerminalKind::origin_indicator: {
      out.values[g.origin_flat()] = 0.0;
      out.label = "origin_indicator";
      break;
    }
    case TerminalKind::v_plus: {
      out.values = need(v_plus, "V_plus").values;
      out.label = "v_plus";
      break;
    }
    case TerminalKind::v_ominus: {
      const auto& vo = need(v_ominus, "V_ominus");
      for (int i = 0; i < g.total; ++i) {
        out.values[i] = std::isfinite(vo.values[i]) ? vo.values[i] : kInf;
      }
      out.label = "v_ominus";
      break;
    }
    case TerminalKind::vf1: {
      if (spec.r < 0.0) throw ContractViolation("vf1 needs r >= 0");
      const auto& vo = need(v_ominus, "V_ominus");
      for (int i = 0; i < g.total; ++i) {
        if (!std::isfinite(vo.values[i])) continue;
        out.values[i] = vo.values[i] + spec.r * g.point(i).squaredNorm();
      }
      out.label = "vf1";
      break;
    }
    case TerminalKind::vf2: {
      if (spec.r < 0.0) throw ContractViolation("vf2 needs r >= 0");
      const auto& vo = need(v_ominus, "V_ominus");
      if (spec.r == 0.0) {
        for (int i = 0; i < g.total; ++i) {
          out.values[i] = std::isfinite(vo.values[i]) ? vo.values[i] : kInf;
        }
      } else {
        const auto& vp = need(v_plus, "V_plus");
        for (int i = 0; i < g.total; ++i) {
          if (!std::isfinite(vo.values[i]) || !std::isfinite(vp.values[i])) continue;
          out.values[i] = vo.values[i] + spec.r * (vp.values[i] - vo.values[i]);
        }
      }
      out.label = "vf2";
      break;
    }
    case TerminalKind::beta_composite: {
      const auto& vo = need(v_ominus, "V_ominus");
      const auto& vp = need(v_plus, "V_plus");
      auto beta = spec.beta ? spec.beta : default_beta;
      for (int i = 0; i < g.total; ++i) {
        if (!std::isfinite(vo.values[i])) continue;
        const double gap = vp.values[i] - vo.values[i];
        out.values[i] = vo.values[i] + (std::isfinite(gap) ? beta(gap) : beta(kInf));
      }
      out.label = "beta_composite";
      break;
    }
    case TerminalKind::amrit: {
      if (spec.amrit_field.values.empty()) {
        throw ContractViolation("build_terminal_cost: missing amrit field");
      }
      if (!spec.amrit_field.grid.compatible(g)) {
        throw ContractViolation("amrit field grid does not match the state grid");
      }
      for (int i = 0; i < g.total; ++i) {
        const Vec x = g.point(i);
        if (in_box(x, spec.terminal_lower, spec.terminal_upper, 1e-12)) {
          out.values[i] = spec.amrit_field.values[i];
        }
      }
      out.label = "amrit";
      break;
    }
  }
  const double at_origin = out.values[g.origin_flat()];
  if (!(std::abs(at_origin) <= 1e-9)) {
    throw ContractViolation("terminal cost must vanish at the origin");
  }
  return out;
}

AmritReport check_amrit_condition(const ModelInstance& model, const GridBundle& grids,
                                  const ExtendedField& v_f,
                                  const std::function<Vec(const Vec&)>& kappa_f,
                                  const Vec& box_lower, const Vec& box_upper, double tol) {
  AmritReport rep;
  const StateGrid& g = grids.state;
  for (int i = 0; i < g.total; ++i) {
    const Vec x = g.point(i);
    if (!in_box(x, box_lower, box_upper, 1e-12)) continue;
    rep.nodes_checked += 1;
    const Vec u = kappa_f(x);
    if (!admissible(model, x, u)) {
      rep.admissibility_violations += 1;
      continue;
    }
    const Vec y = model.system.forward_map(x, u);
    if (!in_box(y, box_lower, box_upper, 1e-9)) {
      rep.invariance_violations += 1;
      continue;
    }
    const double vf_x = v_f.values[i];
    const double vf_y = interpolate(v_f, y);
    if (!std::isfinite(vf_x) || !std::isfinite(vf_y)) {
      rep.decrease_violations += 1;
      continue;
    }
    const double margin = vf_y - vf_x + model.cost.eval(x, u);
    rep.max_decrease_margin = std::max(rep.max_decrease_margin, margin);
    if (margin > tol) rep.decrease_violations += 1;
  }
  rep.pass = rep.nodes_checked > 0 && rep.decrease_violations == 0 &&
             rep.admissibility_violations == 0 && rep.invariance_violations == 0;
  return rep;
}

std::optional<Vec> mpc_feedback(const ModelInstance& model, const GridBundle& grids,
                                const ExtendedField& v_tail, const Vec& x) {
  double best = kInf;
  int best_j = -1;
  for (int j = 0; j < grids.control.total; ++j) {
    const Vec u = grids.control.point(j);
    if (!admissible(model, x, u)) continue;
    const Vec y = model.system.forward_map(x, u);
    const double tail = interpolate(v_tail, y);
    if (tail == kInf) continue;
    const double cand = model.cost.eval(x, u) + tail;
    if (cand < best) {
      best = cand;
      best_j = j;
    }
  }
  if (best_j < 0) return std::nullopt;
  return grids.control.point(best_j);
}

ClosedLoopResult simulate_closed_loop(const ModelInstance& model, const GridBundle& grids,
                                      const ExtendedField& v_tail, const Vec& x0,
                                      const SimParams& params) {
  ClosedLoopResult out;
  Vec x = x0;
  int inside_streak = 0;
  auto inside_ball = [&](const Vec& s) {
    for (int k = 0; k < grids.state.dim(); ++k) {
      if (std::abs(s[k]) > params.radius_cells * grids.state.axes[k].spacing) return false;
    }
    return true;
  };
  if (params.record_trajectory) out.trajectory.push_back(x);
  for (int step = 0; step < params.max_steps; ++step) {
    if (!grids.state.contains(x)) {
      out.infeasible_at = step;
      break;
    }
    auto u = mpc_feedback(model, grids, v_tail, x);
    if (!u) {
      out.infeasible_at = step;
      break;
    }
    out.accumulated_cost += model.cost.eval(x, *u);
    x = model.system.forward_map(x, *u);
    out.steps = step + 1;
    if (params.record_trajectory) {
      out.inputs.push_back(*u);
      out.trajectory.push_back(x);
    }
    if (inside_ball(x)) {
      inside_streak += 1;
      if (inside_streak >= params.dwell) {
        out.converged = true;
        break;
      }
    } else {
      inside_streak = 0;
    }
  }
  return out;
}

ClosedLoopResult simulate_closed_loop_horizon(const ModelInstance& model,
                                              const GridBundle& grids,
                                              const ExtendedField& terminal, int N,
                                              const Vec& x0, const SimParams& params) {
  if (N < 1) throw ContractViolation("simulate_closed_loop_horizon needs N >= 1");
  if (N == 1) return simulate_closed_loop(model, grids, terminal, x0, params);
  auto levels = value_iterate_finite(model, grids, terminal, N - 1);
  return simulate_closed_loop(model, grids, levels.back().value, x0, params);
}

std::optional<int> min_stabilizing_horizon(const ModelInstance& model, const GridBundle& grids,
                                           const ExtendedField& terminal,
                                           const ValueSolution& v_plus, int n_max,
                                           const SimParams& params) {
  if (n_max < 1) throw ContractViolation("min_stabilizing_horizon needs n_max >= 1");
  std::vector<int> starts;
  for (int i = 0; i < grids.state.total; ++i) {
    if (v_plus.masked(i)) starts.push_back(i);
  }
  SimParams quiet = params;
  quiet.record_trajectory = false;
  BellmanTable table = make_forward_table(model, grids);
  std::vector<double> tail = terminal.values;
  std::vector<double> next;
  for (int n = 1; n <= n_max; ++n) {
    if (n > 1) {
      bellman_sweep(table, tail, next, nullptr);
      tail.swap(next);
    }
    ExtendedField tail_field;
    tail_field.grid = grids.state;
    tail_field.values = tail;
    tail_field.label = terminal.label;
    tail_field.polarity = FieldPolarity::min_type;
    std::vector<uint8_t> ok(starts.size(), 0);
    parallel_for(static_cast<int>(starts.size()), [&](int s) {
      auto r = simulate_closed_loop(model, grids, tail_field, grids.state.point(starts[s]),
                                    quiet);
      ok[s] = r.converged && !r.infeasible_at ? 1 : 0;
    });
    bool all_ok = true;
    for (uint8_t o : ok) {
      if (!o) {
        all_ok = false;
        break;
      }
    }
    if (all_ok) return n;
  }
  return std::nullopt;
}

std::vector<double> convergence_profile(const ModelInstance& model, const GridBundle& grids,
                                        const ExtendedField& terminal,
                                        const ValueSolution& v_plus, int n_max) {
  auto levels = value_iterate_finite(model, grids, terminal, n_max);
  std::vector<double> gaps;
  gaps.reserve(n_max);
  for (const auto& level : levels) {
    double gap = 0.0;
    for (int i = 0; i < grids.state.total; ++i) {
      if (!v_plus.masked(i)) continue;
      const double a = level.value.values[i];
      const double b = v_plus.value.values[i];
      if (!std::isfinite(a)) {
        gap = kInf;
        break;
      }
      gap = std::max(gap, std::abs(a - b));
    }
    gaps.push_back(gap);
  }
  return gaps;
}

}  // namespace empc
