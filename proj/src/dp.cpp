#include "empc/dp.hpp"

#include <algorithm>
#include <cmath>

#include "empc/threads.hpp"

namespace empc {

namespace {

constexpr int32_t kOutOfBox = -1;
constexpr int32_t kInadmissible = -2;

std::vector<int> default_state_nodes(const std::string& name, int dim) {
  if (name == "lq" || name == "lq-wide") return {401};
  if (name == "nonlinear") return {81, 161};
  return std::vector<int>(dim, 81);
}

std::vector<int> default_control_nodes(const std::string& name, int dim) {
  // Control spacings match the state lattice they drive. Coarser control
  // lattices cannot zero the driven state exactly (the terminal condition
  // becomes unreachable from off-lattice rows), finer ones put every
  // transition between nodes and smear the value functions with
  // interpolation error.
  if (name == "lq") return {41};
  if (name == "lq-wide") return {81};
  if (name == "nonlinear") return {161};
  return std::vector<int>(dim, 41);
}

double interp_pair(const BellmanTable& t, const std::vector<double>& values, int pair) {
  CellRef cell;
  cell.base = t.cell[pair];
  cell.inside = true;
  const double* f = &t.frac[static_cast<size_t>(pair) * t.dim];
  for (int k = 0; k < t.dim; ++k) cell.frac[k] = f[k];
  return interpolate_cell(t.sgrid, values, cell);
}

double pair_residual(const std::vector<double>& a, const std::vector<double>& b,
                     double ignore_above) {
  double res = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool ia = !(a[i] < ignore_above);
    const bool ib = !(b[i] < ignore_above);
    if (ia && ib) continue;
    if (ia != ib) return kInf;
    res = std::max(res, std::abs(a[i] - b[i]));
  }
  return res;
}

struct IterOpts {
  double tol = 1e-6;
  int max_iter = 10000;
  double conv_p = 0.0;
  double ignore_above = kInf;
  const std::vector<uint8_t>* active = nullptr;  // nodes outside stay +inf
};

struct IterOut {
  std::vector<double> values;
  std::vector<int32_t> policy;
  int iterations = 0;
  double residual = kInf;
  bool converged = false;
  std::vector<double> history;
};

IterOut iterate_table(const BellmanTable& t, std::vector<double> seed, const IterOpts& o) {
  IterOut out;
  std::vector<double> cur = std::move(seed);
  std::vector<double> next(cur.size());
  std::vector<double> conv_buf;
  out.policy.assign(cur.size(), -1);
  auto apply_mask = [&](std::vector<double>& v) {
    if (!o.active) return;
    for (size_t i = 0; i < v.size(); ++i) {
      if (!(*o.active)[i]) v[i] = kInf;
    }
  };
  apply_mask(cur);
  for (int it = 1; it <= o.max_iter; ++it) {
    const std::vector<double>* src = &cur;
    if (o.conv_p > 0.0) {
      conv_buf = cur;
      inf_convolve_l1_inplace(t.sgrid, conv_buf, o.conv_p);
      src = &conv_buf;
    }
    bellman_sweep(t, *src, next, &out.policy);
    apply_mask(next);
    const double res = pair_residual(cur, next, o.ignore_above);
    out.history.push_back(res);
    cur.swap(next);
    out.iterations = it;
    out.residual = res;
    if (res <= o.tol) {
      out.converged = true;
      break;
    }
  }
  out.values = std::move(cur);
  return out;
}

ValueSolution finalize_strict(const BellmanTable& t, IterOut&& it, const SolveConfig& cfg,
                              bool backward, std::string label) {
  ValueSolution sol;
  sol.backward = backward;
  sol.iterations = it.iterations;
  sol.residual = it.residual;
  sol.converged = it.converged;
  sol.residual_history = std::move(it.history);
  sol.policy = std::move(it.policy);
  sol.domain_mask.assign(it.values.size(), 0);
  for (size_t i = 0; i < it.values.size(); ++i) {
    if (it.values[i] < cfg.feasible_threshold) {
      sol.domain_mask[i] = 1;
    } else {
      it.values[i] = kInf;
      sol.policy[i] = -1;
    }
  }
  sol.value.grid = t.sgrid;
  sol.value.values = std::move(it.values);
  sol.value.label = std::move(label);
  sol.value.polarity = FieldPolarity::min_type;
  if (backward) {
    for (double& v : sol.value.values) v = -v;
    sol.value.polarity = FieldPolarity::max_type;
  }
  return sol;
}

ValueSolution finalize_relaxed(const BellmanTable& t, IterOut&& it, bool backward,
                               std::string label) {
  ValueSolution sol;
  sol.backward = backward;
  sol.iterations = it.iterations;
  sol.residual = it.residual;
  sol.converged = it.converged;
  sol.residual_history = std::move(it.history);
  sol.policy = std::move(it.policy);
  sol.domain_mask.assign(it.values.size(), 0);
  for (size_t i = 0; i < it.values.size(); ++i) {
    if (std::isfinite(it.values[i])) sol.domain_mask[i] = 1;
  }
  sol.value.grid = t.sgrid;
  sol.value.values = std::move(it.values);
  sol.value.label = std::move(label);
  sol.value.polarity = FieldPolarity::min_type;
  if (backward) {
    for (double& v : sol.value.values) v = -v;
    sol.value.polarity = FieldPolarity::max_type;
  }
  return sol;
}

std::vector<double> cone_seed(const RectGrid& g, double slope, int center) {
  std::vector<double> v(g.total, 0.0);
  const auto c = g.unflat(center);
  for (int i = 0; i < g.total; ++i) {
    int rem = i;
    double dist = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
      const int idx = rem / g.strides[k];
      rem -= idx * g.strides[k];
      dist += std::abs(idx - c[k]) * g.axes[k].spacing;
    }
    v[i] = slope * dist;
  }
  return v;
}

std::vector<double> indicator_seed(const RectGrid& g) {
  std::vector<double> v(g.total, kInf);
  v[g.origin_flat()] = 0.0;
  return v;
}

double masked_sup_diff(const ValueSolution& exact, const ValueSolution& relaxed) {
  double d = 0.0;
  for (size_t i = 0; i < exact.domain_mask.size(); ++i) {
    if (!exact.domain_mask[i]) continue;
    const double a = exact.value.values[i];
    const double b = relaxed.value.values[i];
    if (!std::isfinite(b)) return kInf;
    d = std::max(d, std::abs(a - b));
  }
  return d;
}

}  // namespace

GridBundle default_grids(const ModelInstance& model) {
  return make_grids(model, default_state_nodes(model.name, model.system.state_dim),
                    default_control_nodes(model.name, model.system.control_dim));
}

GridBundle make_grids(const ModelInstance& model, const std::vector<int>& state_nodes,
                      const std::vector<int>& control_nodes) {
  GridBundle g;
  g.state = make_state_grid(model.constraints.state_lower, model.constraints.state_upper,
                            state_nodes);
  g.control = make_control_grid(model.constraints.control_lower,
                                model.constraints.control_upper, control_nodes);
  return g;
}

BellmanTable make_forward_table(const ModelInstance& model, const GridBundle& grids,
                                const StageFn* stage_override) {
  BellmanTable t;
  t.sgrid = grids.state;
  t.cgrid = grids.control;
  t.n_nodes = grids.state.total;
  t.n_controls = grids.control.total;
  t.dim = grids.state.dim();
  t.backward = false;
  t.stage.assign(static_cast<size_t>(t.n_nodes) * t.n_controls, 0.0);
  t.cell.assign(static_cast<size_t>(t.n_nodes) * t.n_controls, kInadmissible);
  t.frac.assign(static_cast<size_t>(t.n_nodes) * t.n_controls * t.dim, 0.0);
  parallel_for(t.n_nodes, [&](int i) {
    const Vec x = grids.state.point(i);
    for (int j = 0; j < t.n_controls; ++j) {
      const size_t pair = static_cast<size_t>(i) * t.n_controls + j;
      const Vec u = grids.control.point(j);
      if (!admissible(model, x, u)) continue;
      const Vec y = model.system.forward_map(x, u);
      CellRef cell = locate_cell(grids.state, y);
      if (!cell.inside) {
        t.cell[pair] = kOutOfBox;
        continue;
      }
      t.cell[pair] = cell.base;
      for (int k = 0; k < t.dim; ++k) t.frac[pair * t.dim + k] = cell.frac[k];
      t.stage[pair] = stage_override ? (*stage_override)(x, u) : model.cost.eval(x, u);
    }
  });
  return t;
}

BellmanTable make_backward_table(const ModelInstance& model, const GridBundle& grids) {
  if (model.system.inverse_method == InverseMethod::unavailable) {
    throw ContractViolation("backward solve needs inverse dynamics");
  }
  BellmanTable t;
  t.sgrid = grids.state;
  t.cgrid = grids.control;
  t.n_nodes = grids.state.total;
  t.n_controls = grids.control.total;
  t.dim = grids.state.dim();
  t.backward = true;
  t.stage.assign(static_cast<size_t>(t.n_nodes) * t.n_controls, 0.0);
  t.cell.assign(static_cast<size_t>(t.n_nodes) * t.n_controls, kInadmissible);
  t.frac.assign(static_cast<size_t>(t.n_nodes) * t.n_controls * t.dim, 0.0);
  parallel_for(t.n_nodes, [&](int i) {
    const Vec y = grids.state.point(i);
    for (int j = 0; j < t.n_controls; ++j) {
      const size_t pair = static_cast<size_t>(i) * t.n_controls + j;
      const Vec u = grids.control.point(j);
      auto xm = try_inverse_dynamics(model, y, u);
      if (!xm || !admissible(model, *xm, u)) continue;
      CellRef cell = locate_cell(grids.state, *xm);
      if (!cell.inside) {
        t.cell[pair] = kOutOfBox;
        continue;
      }
      t.cell[pair] = cell.base;
      for (int k = 0; k < t.dim; ++k) t.frac[pair * t.dim + k] = cell.frac[k];
      t.stage[pair] = model.cost.eval(*xm, u);
    }
  });
  return t;
}

void bellman_sweep(const BellmanTable& t, const std::vector<double>& interp_values,
                   std::vector<double>& v_out, std::vector<int32_t>* policy) {
  v_out.resize(interp_values.size());
  parallel_for(t.n_nodes, [&](int i) {
    double best = kInf;
    int32_t best_j = -1;
    const size_t row = static_cast<size_t>(i) * t.n_controls;
    for (int j = 0; j < t.n_controls; ++j) {
      if (t.cell[row + j] < 0) continue;
      const double tail = interp_pair(t, interp_values, static_cast<int>(row + j));
      if (tail == kInf) continue;
      const double cand = t.stage[row + j] + tail;
      if (cand < best) {
        best = cand;
        best_j = static_cast<int32_t>(j);
      }
    }
    v_out[i] = best;
    if (policy) (*policy)[i] = best_j;
  });
}

std::vector<uint8_t> reachable_set(const BellmanTable& t, int target_node,
                                   int radius_cells) {
  const RectGrid& g = t.sgrid;
  std::vector<uint8_t> reach(g.total, 0);
  const auto target = g.unflat(target_node);
  for (int i = 0; i < g.total; ++i) {
    bool near = true;
    int rem = i;
    for (int k = 0; k < g.dim(); ++k) {
      const int idx = rem / g.strides[k];
      rem -= idx * g.strides[k];
      if (std::abs(idx - target[k]) > radius_cells) near = false;
    }
    if (near) reach[i] = 1;
  }
  const int corners = 1 << t.dim;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < t.n_nodes; ++i) {
      if (reach[i]) continue;
      const size_t row = static_cast<size_t>(i) * t.n_controls;
      bool ok = false;
      for (int j = 0; j < t.n_controls && !ok; ++j) {
        const int32_t base = t.cell[row + j];
        if (base < 0) continue;
        const double* frac = &t.frac[(row + j) * t.dim];
        bool all_in = true;
        for (int m = 0; m < corners && all_in; ++m) {
          double w = 1.0;
          int offset = 0;
          for (int k = 0; k < t.dim; ++k) {
            const bool hi = (m >> k) & 1;
            w *= hi ? frac[k] : 1.0 - frac[k];
            if (hi) offset += g.strides[k];
          }
          if (w == 0.0) continue;
          all_in = reach[base + offset] != 0;
        }
        ok = all_in;
      }
      if (ok) {
        reach[i] = 1;
        changed = true;
      }
    }
  }
  return reach;
}

double bellman_residual(const BellmanTable& t, const std::vector<double>& values,
                        double conv_p) {
  std::vector<double> src = values;
  if (conv_p > 0.0) inf_convolve_l1_inplace(t.sgrid, src, conv_p);
  std::vector<double> next;
  bellman_sweep(t, src, next, nullptr);
  double res = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || !std::isfinite(next[i])) continue;
    res = std::max(res, std::abs(values[i] - next[i]));
  }
  return res;
}

ValueSolution solve_forward(const ModelInstance& model, const GridBundle& grids,
                            const SolveConfig& cfg) {
  BellmanTable t = make_forward_table(model, grids);
  const std::vector<uint8_t> reach = reachable_set(t, grids.state.origin_flat());
  IterOpts o{cfg.tol, cfg.max_iter, 0.0, cfg.feasible_threshold, &reach};
  IterOut it = iterate_table(
      t, cone_seed(grids.state, cfg.seed_slope, grids.state.origin_flat()), o);
  return finalize_strict(t, std::move(it), cfg, false, "V_plus");
}

ValueSolution solve_backward(const ModelInstance& model, const GridBundle& grids,
                             const SolveConfig& cfg) {
  BellmanTable t = make_backward_table(model, grids);
  const std::vector<uint8_t> reach = reachable_set(t, grids.state.origin_flat());
  IterOpts o{cfg.tol, cfg.max_iter, 0.0, cfg.feasible_threshold, &reach};
  IterOut it = iterate_table(
      t, cone_seed(grids.state, cfg.seed_slope, grids.state.origin_flat()), o);
  return finalize_strict(t, std::move(it), cfg, true, "V_minus");
}

namespace {

ValueSolution relaxed_from_table(const BellmanTable& t, const SolveConfig& cfg, double p,
                                 const ExtendedField* warm_start) {
  if (!(p > 0.0)) throw ContractViolation("relaxed solve needs p > 0");
  std::vector<double> seed;
  if (warm_start) {
    seed = warm_start->values;
    if (t.backward) {
      for (double& v : seed) v = -v;  // iterate on W = -V
    }
  } else {
    seed = indicator_seed(t.sgrid);
  }
  IterOpts o{cfg.tol, cfg.max_iter, p, kInf};
  IterOut it = iterate_table(t, std::move(seed), o);
  return finalize_relaxed(t, std::move(it), t.backward,
                          t.backward ? "V_ominus" : "V_oplus");
}

}  // namespace

ValueSolution solve_forward_relaxed(const ModelInstance& model, const GridBundle& grids,
                                    const SolveConfig& cfg, double p,
                                    const ExtendedField* warm_start) {
  BellmanTable t = make_forward_table(model, grids);
  return relaxed_from_table(t, cfg, p, warm_start);
}

ValueSolution solve_backward_relaxed(const ModelInstance& model, const GridBundle& grids,
                                     const SolveConfig& cfg, double p,
                                     const ExtendedField* warm_start) {
  BellmanTable t = make_backward_table(model, grids);
  return relaxed_from_table(t, cfg, p, warm_start);
}

double calibrate_penalty(const ModelInstance& model, const GridBundle& grids,
                         const SolveConfig& cfg, const ValueSolution& vplus,
                         const ValueSolution& vminus, CalibrationReport* report) {
  const double threshold = 10.0 * cfg.tol;
  const BellmanTable fwd_table = make_forward_table(model, grids);
  const BellmanTable bwd_table = make_backward_table(model, grids);
  double p = 1.0;
  bool prev_ok = false;
  double prev_p = 0.0;
  ValueSolution fwd, bwd, prev_fwd, prev_bwd;
  const ExtendedField* warm_f = nullptr;
  const ExtendedField* warm_b = nullptr;
  CalibrationReport local;
  CalibrationReport& rep = report ? *report : local;
  while (p <= static_cast<double>(1 << 20)) {
    fwd = relaxed_from_table(fwd_table, cfg, p, warm_f);
    bwd = relaxed_from_table(bwd_table, cfg, p, warm_b);
    const double gap_f = masked_sup_diff(vplus, fwd);
    const double gap_b = masked_sup_diff(vminus, bwd);
    const bool ok = gap_f <= threshold && gap_b <= threshold;
    rep.steps.push_back({p, gap_f, gap_b, ok});
    if (ok && prev_ok) {
      rep.p = prev_p;
      rep.forward_relaxed = std::move(prev_fwd);
      rep.backward_relaxed = std::move(prev_bwd);
      return prev_p;
    }
    prev_ok = ok;
    prev_p = p;
    prev_fwd = std::move(fwd);
    prev_bwd = std::move(bwd);
    warm_f = &prev_fwd.value;
    warm_b = &prev_bwd.value;
    p *= 2.0;
  }
  throw CalibrationFailure("penalty calibration did not stabilize below p = 2^20");
}

double calibrate_penalty(const ModelInstance& model, const GridBundle& grids,
                         const SolveConfig& cfg, CalibrationReport* report) {
  ValueSolution vplus = solve_forward(model, grids, cfg);
  ValueSolution vminus = solve_backward(model, grids, cfg);
  return calibrate_penalty(model, grids, cfg, vplus, vminus, report);
}

std::vector<ValueSolution> value_iterate_finite(const ModelInstance& model,
                                                const GridBundle& grids,
                                                const ExtendedField& terminal, int N,
                                                const StageFn* stage_override) {
  if (N < 1) throw ContractViolation("value_iterate_finite needs N >= 1");
  if (!terminal.grid.compatible(grids.state)) {
    throw ContractViolation("terminal field grid does not match the state grid");
  }
  if (terminal.polarity != FieldPolarity::min_type) {
    throw ContractViolation("terminal field must be min-type");
  }
  for (double v : terminal.values) {
    if (v == -kInf) throw ContractViolation("terminal field must not contain -inf");
  }
  BellmanTable t = make_forward_table(model, grids, stage_override);
  std::vector<ValueSolution> levels;
  levels.reserve(N);
  std::vector<double> prev = terminal.values;
  std::vector<double> next;
  for (int k = 1; k <= N; ++k) {
    ValueSolution sol;
    sol.policy.assign(prev.size(), -1);
    bellman_sweep(t, prev, next, &sol.policy);
    sol.value.grid = grids.state;
    sol.value.values = next;
    sol.value.label = "V_" + std::to_string(k);
    sol.value.polarity = FieldPolarity::min_type;
    sol.domain_mask.assign(next.size(), 0);
    for (size_t i = 0; i < next.size(); ++i) {
      if (std::isfinite(next[i])) sol.domain_mask[i] = 1;
    }
    sol.iterations = k;
    sol.residual = pair_residual(prev, next, kInf);
    sol.converged = true;
    prev.swap(next);
    levels.push_back(std::move(sol));
  }
  return levels;
}

double cost_to_travel(const ModelInstance& model, const GridBundle& grids, const Vec& a,
                      const Vec& b, int N, bool relaxed, double p, const SolveConfig& cfg,
                      TravelReport* report) {
  if (!grids.state.contains(a)) {
    throw ContractViolation("cost_to_travel: start state outside the state box");
  }
  if (relaxed && !(p > 0.0)) throw ContractViolation("cost_to_travel: relaxed needs p > 0");
  double snap_dist = 0.0;
  const int target = grids.state.nearest_flat(b, &snap_dist);
  if (report) {
    report->snapped = snap_dist > kSnapEps;
    report->snap_distance_cells = snap_dist;
    report->target_node = grids.state.point(target);
  }
  BellmanTable t = make_forward_table(model, grids);
  if (N == kInfiniteHorizon) {
    std::vector<double> seed;
    std::vector<uint8_t> reach;
    IterOpts o{cfg.tol, cfg.max_iter, relaxed ? p : 0.0,
               relaxed ? kInf : cfg.feasible_threshold};
    if (relaxed) {
      seed.assign(grids.state.total, kInf);
      seed[target] = 0.0;
    } else {
      seed = cone_seed(grids.state, cfg.seed_slope, target);
      reach = reachable_set(t, target);
      o.active = &reach;
    }
    IterOut it = iterate_table(t, std::move(seed), o);
    if (report) {
      report->converged = it.converged;
      report->iterations = it.iterations;
    }
    if (!relaxed) {
      for (double& v : it.values) {
        if (!(v < cfg.feasible_threshold)) v = kInf;
      }
    }
    CellRef cell = locate_cell(grids.state, a);
    return interpolate_cell(grids.state, it.values, cell);
  }
  if (N < 0) throw ContractViolation("cost_to_travel: horizon must be >= 0 or infinite");
  std::vector<double> w(grids.state.total, kInf);
  w[target] = 0.0;
  std::vector<double> next;
  for (int k = 0; k < N; ++k) {
    if (relaxed) {
      std::vector<double> conv = w;
      inf_convolve_l1_inplace(grids.state, conv, p);
      bellman_sweep(t, conv, next, nullptr);
    } else {
      bellman_sweep(t, w, next, nullptr);
    }
    w.swap(next);
  }
  if (report) {
    report->converged = true;
    report->iterations = N;
  }
  CellRef cell = locate_cell(grids.state, a);
  return interpolate_cell(grids.state, w, cell);
}

SplitResult optimal_split(const ModelInstance& model, const GridBundle& grids, const Vec& x,
                          int N, double p, const SolveConfig& cfg) {
  if (N < 2) throw ContractViolation("optimal_split needs N >= 2");
  if (!grids.state.contains(x)) {
    throw ContractViolation("optimal_split: state outside the state box");
  }
  BellmanTable t = make_forward_table(model, grids);
  const CellRef cell_x = locate_cell(grids.state, x);
  const int origin = grids.state.origin_flat();

  // k-step cost from x to the origin, k = 1..N-1.
  std::vector<double> to_origin(N, kInf);
  {
    std::vector<double> w = indicator_seed(grids.state);
    std::vector<double> next;
    for (int k = 1; k <= N - 1; ++k) {
      bellman_sweep(t, w, next, nullptr);
      w.swap(next);
      to_origin[k] = interpolate_cell(grids.state, w, cell_x);
    }
  }
  // Relaxed m-step cost from the origin to x, m = 1..N-1.
  std::vector<double> from_origin(N, kInf);
  {
    std::vector<double> w(grids.state.total, kInf);
    w[grids.state.nearest_flat(x)] = 0.0;
    std::vector<double> next;
    for (int m = 1; m <= N - 1; ++m) {
      std::vector<double> conv = w;
      inf_convolve_l1_inplace(grids.state, conv, p);
      bellman_sweep(t, conv, next, nullptr);
      w.swap(next);
      from_origin[m] = w[origin];
    }
  }
  SplitResult best;
  for (int M = 1; M <= N - 1; ++M) {
    const double v = to_origin[N - M] + from_origin[M];
    if (v < best.value) {
      best.value = v;
      best.M = M;
    }
  }
  if (!std::isfinite(best.value)) {
    throw InfeasibleSplit("optimal_split: every horizon split is infeasible");
  }
  return best;
}

Vec control_at(const ControlGrid& grid, int flat_index) { return grid.point(flat_index); }

std::optional<Vec> policy_control(const ValueSolution& sol, const ControlGrid& cgrid,
                                  int node) {
  const int32_t j = sol.policy[node];
  if (j < 0) return std::nullopt;
  return cgrid.point(j);
}

std::optional<Vec> forward_policy_at(const ModelInstance& model, const GridBundle& grids,
                                     const ExtendedField& value, const Vec& x) {
  double best = kInf;
  int best_j = -1;
  for (int j = 0; j < grids.control.total; ++j) {
    const Vec u = grids.control.point(j);
    if (!admissible(model, x, u)) continue;
    const Vec y = model.system.forward_map(x, u);
    const double tail = interpolate(value, y);
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

std::optional<Vec> backward_policy_at(const ModelInstance& model, const GridBundle& grids,
                                      const ExtendedField& v_minus, const Vec& y) {
  double best = -kInf;
  int best_j = -1;
  for (int j = 0; j < grids.control.total; ++j) {
    const Vec u = grids.control.point(j);
    auto xm = try_inverse_dynamics(model, y, u);
    if (!xm || !admissible(model, *xm, u)) continue;
    const double tail = interpolate(v_minus, *xm);
    if (tail == -kInf) continue;
    const double cand = -model.cost.eval(*xm, u) + tail;
    if (cand > best) {
      best = cand;
      best_j = j;
    }
  }
  if (best_j < 0) return std::nullopt;
  return grids.control.point(best_j);
}

}  // namespace empc
