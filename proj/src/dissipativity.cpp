#include "empc/dissipativity.hpp"

#include <algorithm>
#include <cmath>

namespace empc {

namespace {

constexpr size_t kMaxStoredViolations = 1000;

double norm2(const Vec& x) { return x.norm(); }

// True when the node lies within one cell of the origin in every dimension;
// interpolation error dominates the quadratic margin there.
bool near_origin_cell(const RectGrid& g, int flat) {
  for (int k = 0; k < g.dim(); ++k) {
    const int i = flat / g.strides[k];
    flat -= i * g.strides[k];
    if (std::abs(i - g.axes[k].origin_index) > 1) return false;
  }
  return true;
}

bool is_origin_node(const RectGrid& g, int flat) { return flat == g.origin_flat(); }

void record_violation(DissipativityReport& rep, const Vec& x, const Vec& u, double rotated,
                      double required) {
  rep.violation_count += 1;
  if (rep.violations.size() < kMaxStoredViolations) {
    rep.violations.push_back({x, u, rotated, required});
  }
}

}  // namespace

StorageFunction storage_from_value(const ValueSolution& sol, std::string label) {
  StorageFunction s;
  s.field = negate(sol.value, label);
  s.label = std::move(label);
  return s;
}

StorageFunction zero_storage(const StateGrid& grid, std::string label) {
  StorageFunction s;
  s.field = make_field(grid, 0.0, label, FieldPolarity::min_type);
  s.label = std::move(label);
  return s;
}

double ComparisonFunction::operator()(double s) const {
  switch (form) {
    case Form::quadratic:
      return coefficient * s * s;
    case Form::scaled_norm:
      return coefficient * s;
    case Form::custom:
      return custom(s);
  }
  return 0.0;
}

ComparisonFunction ComparisonFunction::quadratic(double c) {
  ComparisonFunction f;
  f.form = Form::quadratic;
  f.coefficient = c;
  return f;
}

ComparisonFunction ComparisonFunction::scaled_norm(double c) {
  ComparisonFunction f;
  f.form = Form::scaled_norm;
  f.coefficient = c;
  return f;
}

double rotated_cost(const ModelInstance& model, const StorageFunction& lambda, const Vec& x,
                    const Vec& u) {
  const double lx = interpolate(lambda.field, x);
  if (!std::isfinite(lx)) {
    throw ContractViolation("rotated_cost: storage function not finite at x");
  }
  const Vec y = model.system.forward_map(x, u);
  if (!lambda.field.grid.contains(y)) return kInf;
  const double ly = interpolate_cell(lambda.field.grid, lambda.field.values,
                                     locate_cell(lambda.field.grid, y));
  if (!std::isfinite(ly)) return kInf;
  return model.cost.eval(x, u) + lx - ly;
}

double certificate_tolerance(double dp_tol, const ExtendedField& field) {
  const RectGrid& g = field.grid;
  std::vector<double> slopes;
  slopes.reserve(field.values.size());
  for (int k = 0; k < g.dim(); ++k) {
    const int stride = g.strides[k];
    const double h = g.axes[k].spacing;
    for (int i = 0; i < g.total; ++i) {
      const int coord = (i / stride) % g.axes[k].n;
      if (coord + 1 >= g.axes[k].n) continue;
      const double a = field.values[i];
      const double b = field.values[i + stride];
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      slopes.push_back(std::abs(b - a) / h);
    }
  }
  double lip = 0.0;
  if (!slopes.empty()) {
    const size_t mid = slopes.size() / 2;
    std::nth_element(slopes.begin(), slopes.begin() + mid, slopes.end());
    lip = slopes[mid];
  }
  return 10.0 * dp_tol + g.max_cell_diameter() * lip;
}

DissipativityReport check_dissipativity(const ModelInstance& model, const GridBundle& grids,
                                        const StorageFunction& lambda, DissKind kind,
                                        const ComparisonFunction& rho, double tol) {
  DissipativityReport rep;
  rep.tol = tol;
  const StateGrid& sg = grids.state;
  double fit = kInf;
  bool fit_seen = false;
  for (int i = 0; i < sg.total; ++i) {
    const double lx = lambda.field.values[i];
    if (!std::isfinite(lx)) continue;
    const Vec x = sg.point(i);
    const double nx = norm2(x);
    const double required = kind == DissKind::strict ? rho(nx) : 0.0;
    double min_rot = kInf;
    for (int j = 0; j < grids.control.total; ++j) {
      const Vec u = grids.control.point(j);
      if (!admissible(model, x, u)) continue;
      const Vec y = model.system.forward_map(x, u);
      double rot = kInf;
      if (sg.contains(y)) {
        const double ly = interpolate_cell(sg, lambda.field.values, locate_cell(sg, y));
        if (std::isfinite(ly)) rot = model.cost.eval(x, u) + lx - ly;
      }
      if (rot == kInf) continue;  // infeasible continuation satisfies any bound
      rep.pairs_checked += 1;
      min_rot = std::min(min_rot, rot);
      const double margin = rot - required;
      if (margin < rep.min_margin) {
        rep.min_margin = margin;
        rep.argmin_x = x;
        rep.argmin_u = u;
      }
      if (margin < -tol) record_violation(rep, x, u, rot, required);
    }
    if (std::isfinite(min_rot) && !is_origin_node(sg, i) && !near_origin_cell(sg, i)) {
      fit = std::min(fit, min_rot / (nx * nx));
      fit_seen = true;
    }
  }
  rep.fitted_coefficient = fit_seen ? std::max(0.0, fit) : 0.0;
  rep.pass = rep.violation_count == 0;
  return rep;
}

DissipativityReport check_two_storage(const ModelInstance& model, const GridBundle& grids,
                                      const StorageFunction& lambda1,
                                      const StorageFunction& lambda2,
                                      const ComparisonFunction& gamma, double tol) {
  ComparisonFunction none;
  DissipativityReport r1 = check_dissipativity(model, grids, lambda1, DissKind::plain, none, tol);
  DissipativityReport r2 = check_dissipativity(model, grids, lambda2, DissKind::plain, none, tol);

  DissipativityReport rep;
  rep.tol = tol;
  rep.violation_count = r1.violation_count + r2.violation_count;
  rep.pairs_checked = r1.pairs_checked + r2.pairs_checked;
  rep.min_margin = std::min(r1.min_margin, r2.min_margin);

  const StateGrid& sg = grids.state;
  double fit = kInf;
  bool fit_seen = false;
  for (int i = 0; i < sg.total; ++i) {
    const double a = lambda1.field.values[i];
    const double b = lambda2.field.values[i];
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    const Vec x = sg.point(i);
    const double nx = norm2(x);
    const double gap = a - b;
    const double margin = gap - gamma(nx);
    rep.pairs_checked += 1;
    if (margin < rep.min_margin) {
      rep.min_margin = margin;
      rep.argmin_x = x;
      rep.argmin_u = Vec();
    }
    if (margin < -tol) record_violation(rep, x, Vec(), gap, gamma(nx));
    if (!is_origin_node(sg, i) && !near_origin_cell(sg, i)) {
      fit = std::min(fit, gap / (nx * nx));
      fit_seen = true;
    }
  }
  rep.fitted_coefficient = fit_seen ? std::max(0.0, fit) : 0.0;
  rep.pass = rep.violation_count == 0;
  return rep;
}

DissipativityReport verify_value_bounds(const ExtendedField& v_plus,
                                        const ExtendedField& v_minus,
                                        const StorageFunction& lambda, BoundKind kind,
                                        const ComparisonFunction& comparison, double tol) {
  if (!v_plus.grid.compatible(v_minus.grid) || !v_plus.grid.compatible(lambda.field.grid)) {
    throw ContractViolation("verify_value_bounds: fields must share a grid");
  }
  DissipativityReport rep;
  rep.tol = tol;
  const RectGrid& g = v_plus.grid;
  for (int i = 0; i < g.total; ++i) {
    const double vp = v_plus.values[i];
    const double vm = v_minus.values[i];
    const double lx = lambda.field.values[i];
    if (!std::isfinite(vp) || !std::isfinite(vm) || !std::isfinite(lx)) continue;
    rep.pairs_checked += 1;
    const Vec x = g.point(i);
    const double nx = norm2(x);
    double required = 0.0;
    if (kind == BoundKind::strict) required = 2.0 * comparison(nx);
    if (kind == BoundKind::two_storage) required = comparison(nx);
    const double upper = -vm - lx;          // -V- >= lambda
    const double lower = lx + vp;           // lambda >= -V+
    const double gap = vp - vm - required;  // V+ - V- >= required
    const double margin = std::min({upper, lower, gap});
    if (margin < rep.min_margin) {
      rep.min_margin = margin;
      rep.argmin_x = x;
    }
    if (margin < -tol) record_violation(rep, x, Vec(), margin, 0.0);
  }
  rep.pass = rep.violation_count == 0;
  return rep;
}

std::vector<Vec> detect_strictness_obstruction(const ExtendedField& v_plus,
                                               const ExtendedField& v_minus, double tol) {
  if (!v_plus.grid.compatible(v_minus.grid)) {
    throw ContractViolation("detect_strictness_obstruction: fields must share a grid");
  }
  std::vector<Vec> out;
  const RectGrid& g = v_plus.grid;
  const int origin = g.origin_flat();
  for (int i = 0; i < g.total; ++i) {
    if (i == origin) continue;
    const double vp = v_plus.values[i];
    const double vm = v_minus.values[i];
    if (!std::isfinite(vp) || !std::isfinite(vm)) continue;
    if (std::abs(vp - vm) <= tol) out.push_back(g.point(i));
  }
  return out;
}

LyapunovResult policy_evaluation_quadratic(const ModelInstance& model, const GridBundle& grids,
                                           const ValueSolution& policy_source,
                                           const SolveConfig& cfg) {
  const StateGrid& sg = grids.state;
  LyapunovResult out;
  out.field = make_field(sg, kInf, "quadratic_lyapunov", FieldPolarity::min_type);

  // Precompute the closed-loop successor cell per node.
  std::vector<int32_t> cell(sg.total, -1);
  std::vector<double> frac(static_cast<size_t>(sg.total) * sg.dim(), 0.0);
  std::vector<double> decrease(sg.total, 0.0);
  long active = 0;
  for (int i = 0; i < sg.total; ++i) {
    if (!policy_source.masked(i) || policy_source.policy[i] < 0) continue;
    const Vec x = sg.point(i);
    const Vec u = grids.control.point(policy_source.policy[i]);
    const Vec y = model.system.forward_map(x, u);
    CellRef c = locate_cell(sg, y);
    if (!c.inside) continue;
    cell[i] = c.base;
    for (int k = 0; k < sg.dim(); ++k) frac[static_cast<size_t>(i) * sg.dim() + k] = c.frac[k];
    decrease[i] = x.squaredNorm();
    active += 1;
  }

  std::vector<double> cur(sg.total, kInf);
  for (int i = 0; i < sg.total; ++i) {
    if (cell[i] >= 0) cur[i] = 0.0;
  }
  cur[sg.origin_flat()] = 0.0;
  std::vector<double> next(sg.total, kInf);
  const double growth_cap = 1e12;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    double res = 0.0;
    double peak = 0.0;
    for (int i = 0; i < sg.total; ++i) {
      if (cell[i] < 0) {
        next[i] = i == sg.origin_flat() ? 0.0 : kInf;
        continue;
      }
      CellRef c;
      c.base = cell[i];
      c.inside = true;
      for (int k = 0; k < sg.dim(); ++k) c.frac[k] = frac[static_cast<size_t>(i) * sg.dim() + k];
      const double tail = interpolate_cell(sg, cur, c);
      next[i] = std::isfinite(tail) ? decrease[i] + tail : kInf;
      if (std::isfinite(next[i])) {
        peak = std::max(peak, next[i]);
        if (std::isfinite(cur[i])) {
          res = std::max(res, std::abs(next[i] - cur[i]));
        } else {
          res = kInf;
        }
      } else if (std::isfinite(cur[i])) {
        res = kInf;
      }
    }
    cur.swap(next);
    out.iterations = it;
    out.growth = peak;
    if (peak > growth_cap) {
      out.diverged = true;
      break;
    }
    if (res <= 10.0 * cfg.tol) {
      out.converged = true;
      break;
    }
  }
  long finite_count = 0;
  for (double v : cur) {
    if (std::isfinite(v)) finite_count += 1;
  }
  if (!out.converged && !out.diverged) out.diverged = true;
  if (active > 0 && finite_count < active / 10) out.diverged = true;
  out.field.values = std::move(cur);
  return out;
}

Rotations build_rotations(const ValueSolution& v_oplus, const ValueSolution& v_ominus,
                          const ExtendedField& lyapunov) {
  Rotations r;
  r.l1 = storage_from_value(v_ominus, "L1");
  r.l2 = storage_from_value(v_oplus, "L2");
  r.l3.label = "L3";
  r.l3.field = r.l1.field;
  r.l3.field.label = "L3";
  for (size_t i = 0; i < r.l3.field.values.size(); ++i) {
    const double add = lyapunov.values[i];
    if (std::isfinite(r.l3.field.values[i]) && std::isfinite(add)) {
      r.l3.field.values[i] += add;
    } else {
      r.l3.field.values[i] = kInf;
    }
  }
  return r;
}

bool check_beta_property(const std::function<double(double)>& beta,
                         std::span<const std::pair<double, double>> sample_pairs, double tol) {
  if (std::abs(beta(0.0)) > tol) return false;
  for (const auto& [a, b] : sample_pairs) {
    if (!(a > b && b >= 0.0)) continue;
    if (beta(a) <= beta(b)) return false;  // must be increasing on samples
    if (beta(a) - beta(b) > a - b + tol) return false;
  }
  return true;
}

std::vector<std::pair<double, double>> beta_sample_pairs(double max_gap, int count) {
  std::vector<double> pts;
  pts.push_back(0.0);
  const double lo = std::min(1e-6, max_gap / 1e6);
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    pts.push_back(lo * std::pow(max_gap / lo, t));
  }
  std::vector<std::pair<double, double>> pairs;
  for (size_t i = 0; i < pts.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      if (pts[i] > pts[j]) pairs.emplace_back(pts[i], pts[j]);
    }
  }
  return pairs;
}

StageFn make_rotated_stage(const ModelInstance& model, const StorageFunction& lambda) {
  ExtendedField field = lambda.field;
  ModelInstance m = model;
  return [m, field](const Vec& x, const Vec& u) {
    const double lx = interpolate(field, x);
    if (!std::isfinite(lx)) return kInf;
    const Vec y = m.system.forward_map(x, u);
    if (!field.grid.contains(y)) return kInf;
    const double ly = interpolate_cell(field.grid, field.values, locate_cell(field.grid, y));
    if (!std::isfinite(ly)) return kInf;
    return m.cost.eval(x, u) + lx - ly;
  };
}

DissipativityReport strict_implies_two_storage(const ModelInstance& model,
                                               const GridBundle& grids,
                                               const StorageFunction& lambda,
                                               const ComparisonFunction& rho, double tol) {
  StorageFunction lambda2;
  lambda2.label = lambda.label + "-rho";
  lambda2.field = lambda.field;
  lambda2.field.label = lambda2.label;
  for (int i = 0; i < grids.state.total; ++i) {
    if (!std::isfinite(lambda2.field.values[i])) continue;
    lambda2.field.values[i] -= rho(grids.state.point(i).norm());
  }
  return check_two_storage(model, grids, lambda, lambda2, rho, tol);
}

}  // namespace empc
