#include "empc/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "empc/dissipativity.hpp"
#include "empc/io.hpp"
#include "empc/mpc.hpp"
#include "empc/threads.hpp"

namespace empc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunContext {
  ExperimentConfig cfg;
  fs::path out;
  ModelInstance model;
  GridBundle grids;

  std::optional<ValueSolution> vplus, vminus, voplus, vominus;
  std::optional<double> penalty;

  json files = json::array();
  json certificates = json::object();
  json wall_times = json::object();
  std::vector<std::string> file_list;
  bool solver_failure = false;
  bool cert_failure = false;
  int travel_counter = 0;

  void write_file(const std::string& name, const std::string& content) {
    const fs::path path = out / name;
    {
      std::ofstream os(path, std::ios::binary);
      if (!os) throw IoError("cannot open output file " + path.string());
      os << content;
      if (!os) throw IoError("failed writing output file " + path.string());
    }
    json entry;
    entry["path"] = name;
    entry["fnv1a64"] = hex64(fnv1a64(content));
    files.push_back(entry);
    file_list.push_back(path.string());
  }

  void record_certificate(const std::string& name, bool pass) {
    certificates[name] = pass;
    if (!pass) cert_failure = true;
  }

  void note_solver(const ValueSolution& sol) {
    if (!sol.converged) solver_failure = true;
  }

  ValueSolution& ensure_vplus() {
    if (!vplus) {
      vplus = solve_forward(model, grids, cfg.solver);
      note_solver(*vplus);
    }
    return *vplus;
  }

  ValueSolution& ensure_vminus() {
    if (!vminus) {
      vminus = solve_backward(model, grids, cfg.solver);
      note_solver(*vminus);
    }
    return *vminus;
  }

  double ensure_penalty() {
    if (!penalty) {
      if (cfg.solver.penalty.auto_mode) {
        CalibrationReport rep;
        penalty = calibrate_penalty(model, grids, cfg.solver, ensure_vplus(), ensure_vminus(),
                                    &rep);
        voplus = std::move(rep.forward_relaxed);
        vominus = std::move(rep.backward_relaxed);
      } else {
        penalty = cfg.solver.penalty.value;
      }
    }
    return *penalty;
  }

  ValueSolution& ensure_voplus() {
    if (!voplus) {
      voplus = solve_forward_relaxed(model, grids, cfg.solver, ensure_penalty());
      note_solver(*voplus);
    }
    return *voplus;
  }

  ValueSolution& ensure_vominus() {
    if (!vominus) {
      vominus = solve_backward_relaxed(model, grids, cfg.solver, ensure_penalty());
      note_solver(*vominus);
    }
    return *vominus;
  }
};

GridBundle grids_for(const ModelInstance& model, const ExperimentConfig& cfg) {
  if (cfg.state_nodes.empty() && cfg.control_nodes.empty()) return default_grids(model);
  GridBundle def = default_grids(model);
  std::vector<int> sn = cfg.state_nodes;
  std::vector<int> cn = cfg.control_nodes;
  if (sn.empty()) {
    for (const auto& a : def.state.axes) sn.push_back(a.n);
  }
  if (cn.empty()) {
    for (const auto& a : def.control.axes) cn.push_back(a.n);
  }
  return make_grids(model, sn, cn);
}

std::string solution_name(const std::string& direction, bool relaxed) {
  if (direction == "forward") return relaxed ? "v_oplus" : "v_plus";
  return relaxed ? "v_ominus" : "v_minus";
}

void run_solve(RunContext& ctx, const json& params) {
  const std::string direction = params.value("direction", "forward");
  const bool relaxed = params.value("relaxed", false);
  if (direction != "forward" && direction != "backward") {
    throw ConfigError("solve.direction must be \"forward\" or \"backward\"");
  }
  ValueSolution* sol = nullptr;
  if (!relaxed) {
    sol = direction == "forward" ? &ctx.ensure_vplus() : &ctx.ensure_vminus();
  } else if (params.contains("p")) {
    const double p = params.at("p").get<double>();
    if (direction == "forward") {
      ctx.voplus = solve_forward_relaxed(ctx.model, ctx.grids, ctx.cfg.solver, p);
      sol = &*ctx.voplus;
    } else {
      ctx.vominus = solve_backward_relaxed(ctx.model, ctx.grids, ctx.cfg.solver, p);
      sol = &*ctx.vominus;
    }
    ctx.note_solver(*sol);
  } else {
    sol = direction == "forward" ? &ctx.ensure_voplus() : &ctx.ensure_vominus();
  }
  const std::string name = solution_name(direction, relaxed);
  {
    std::ostringstream os;
    write_solution_csv(os, *sol, ctx.grids.control);
    ctx.write_file(name + ".csv", os.str());
  }
  {
    std::ostringstream os;
    write_residual_history_csv(os, sol->residual_history);
    ctx.write_file(name + "_residuals.csv", os.str());
  }
  json summary = field_summary_json(sol->value);
  summary["iterations"] = sol->iterations;
  summary["residual"] = sol->residual;
  summary["converged"] = sol->converged;
  ctx.write_file(name + "_summary.json", summary.dump(2) + "\n");
}

StorageFunction storage_by_name(RunContext& ctx, const std::string& name) {
  if (name == "zero") return zero_storage(ctx.grids.state);
  if (name == "v_plus") return storage_from_value(ctx.ensure_vplus(), "-V_plus");
  if (name == "v_minus") return storage_from_value(ctx.ensure_vminus(), "-V_minus");
  if (name == "v_oplus") return storage_from_value(ctx.ensure_voplus(), "-V_oplus");
  if (name == "v_ominus") return storage_from_value(ctx.ensure_vominus(), "-V_ominus");
  throw ConfigError("certify.lambda must be one of: zero, v_plus, v_minus, v_oplus, v_ominus");
}

void run_certify(RunContext& ctx, const json& params) {
  const std::string lambda_name = params.value("lambda", "v_ominus");
  const std::string check = params.value("check", "plain");
  StorageFunction lambda = storage_by_name(ctx, lambda_name);
  const double tol = certificate_tolerance(ctx.cfg.solver.tol, lambda.field);
  DissipativityReport rep;
  std::string cert_name = "certify_" + lambda_name + "_" + check;
  if (check == "plain" || check == "strict") {
    ComparisonFunction rho = ComparisonFunction::quadratic(params.value("rho", 1.0));
    rep = check_dissipativity(ctx.model, ctx.grids, lambda,
                              check == "plain" ? DissKind::plain : DissKind::strict, rho, tol);
  } else if (check == "two_storage") {
    const std::string lambda2_name = params.value("lambda2", "v_oplus");
    StorageFunction lambda2 = storage_by_name(ctx, lambda2_name);
    ComparisonFunction gamma = ComparisonFunction::quadratic(params.value("gamma", 0.0));
    rep = check_two_storage(ctx.model, ctx.grids, lambda, lambda2, gamma, tol);
    cert_name += "_" + lambda2_name;
  } else {
    throw ConfigError("certify.check must be plain, strict, or two_storage");
  }
  ctx.record_certificate(cert_name, rep.pass);
  ctx.write_file(cert_name + ".json", report_json(rep).dump(2) + "\n");
  if (!rep.violations.empty()) {
    std::ostringstream os;
    write_violations_csv(os, rep);
    ctx.write_file(cert_name + "_violations.csv", os.str());
  }
}

TerminalCostSpec terminal_from_params(const json& params) {
  const std::string name = params.value("terminal", "vf2");
  TerminalCostSpec spec;
  spec.r = params.value("r", 1.0);
  if (name == "origin_indicator") {
    spec.kind = TerminalKind::origin_indicator;
  } else if (name == "v_plus") {
    spec.kind = TerminalKind::v_plus;
  } else if (name == "v_ominus") {
    spec.kind = TerminalKind::v_ominus;
  } else if (name == "vf1") {
    spec.kind = TerminalKind::vf1;
  } else if (name == "vf2") {
    spec.kind = TerminalKind::vf2;
  } else if (name == "beta") {
    spec.kind = TerminalKind::beta_composite;
  } else {
    throw ConfigError(
        "mpc.terminal must be one of: origin_indicator, v_plus, v_ominus, vf1, vf2, beta");
  }
  return spec;
}

std::string terminal_tag(const TerminalCostSpec& spec) {
  switch (spec.kind) {
    case TerminalKind::origin_indicator:
      return "origin_indicator";
    case TerminalKind::v_plus:
      return "v_plus";
    case TerminalKind::v_ominus:
      return "v_ominus";
    case TerminalKind::vf1:
      return "vf1_r" + format_double(spec.r);
    case TerminalKind::vf2:
      return "vf2_r" + format_double(spec.r);
    case TerminalKind::beta_composite:
      return "beta";
    case TerminalKind::amrit:
      return "amrit";
  }
  return "terminal";
}

const ExtendedField* vplus_for_terminal(RunContext& ctx, const TerminalCostSpec& spec) {
  if (spec.kind == TerminalKind::v_plus || spec.kind == TerminalKind::beta_composite ||
      (spec.kind == TerminalKind::vf2 && spec.r != 0.0)) {
    return &ctx.ensure_vplus().value;
  }
  return nullptr;
}

const ExtendedField* vominus_for_terminal(RunContext& ctx, const TerminalCostSpec& spec) {
  if (spec.kind == TerminalKind::v_ominus || spec.kind == TerminalKind::vf1 ||
      spec.kind == TerminalKind::vf2 || spec.kind == TerminalKind::beta_composite) {
    return &ctx.ensure_vominus().value;
  }
  return nullptr;
}

void run_mpc(RunContext& ctx, const json& params) {
  TerminalCostSpec spec = terminal_from_params(params);
  const int n_max = params.value("n_max", 20);
  ExtendedField terminal = build_terminal_cost(spec, vplus_for_terminal(ctx, spec),
                                               vominus_for_terminal(ctx, spec), ctx.grids);
  const std::string tag = terminal_tag(spec);
  const ValueSolution& vplus = ctx.ensure_vplus();
  if (params.value("profile", true)) {
    auto gaps = convergence_profile(ctx.model, ctx.grids, terminal, vplus, n_max);
    std::ostringstream os;
    os << "terminal,r,N,gap\n";
    for (size_t i = 0; i < gaps.size(); ++i) {
      os << tag << ',' << format_double(spec.r) << ',' << i + 1 << ','
         << format_double(gaps[i]) << '\n';
    }
    ctx.write_file("mpc_profile_" + tag + ".csv", os.str());
  }
  if (params.value("stabilizing_horizon", false)) {
    SimParams sim;
    sim.radius_cells = params.value("radius", 2.0);
    auto ns = min_stabilizing_horizon(ctx.model, ctx.grids, terminal, vplus, n_max, sim);
    json j;
    j["terminal"] = tag;
    j["r"] = spec.r;
    j["n_max"] = n_max;
    j["stabilizing_horizon"] = ns ? json(*ns) : json("none");
    ctx.write_file("mpc_ns_" + tag + ".json", j.dump(2) + "\n");
  }
  if (params.contains("horizon")) {
    const int horizon = params.at("horizon").get<int>();
    SimParams sim;
    sim.radius_cells = params.value("radius", 2.0);
    sim.record_trajectory = false;
    ExtendedField tail = terminal;
    if (horizon > 1) {
      auto levels = value_iterate_finite(ctx.model, ctx.grids, terminal, horizon - 1);
      tail = levels.back().value;
    }
    std::vector<Vec> starts;
    std::vector<ClosedLoopResult> results;
    for (int i = 0; i < ctx.grids.state.total; ++i) {
      if (!vplus.masked(i)) continue;
      starts.push_back(ctx.grids.state.point(i));
    }
    results.resize(starts.size());
    parallel_for(static_cast<int>(starts.size()), [&](int s) {
      results[s] = simulate_closed_loop(ctx.model, ctx.grids, tail, starts[s], sim);
    });
    std::ostringstream os;
    write_closed_loop_batch_csv(os, starts, results);
    ctx.write_file("mpc_closed_loop_" + tag + "_N" + std::to_string(horizon) + ".csv",
                   os.str());
  }
}

void run_travel(RunContext& ctx, const json& params) {
  Vec a = Vec::Zero(ctx.grids.state.dim());
  Vec b = Vec::Zero(ctx.grids.state.dim());
  auto read_point = [&](const char* key, Vec& dst) {
    if (!params.contains(key)) return;
    const auto& arr = params.at(key);
    if (!arr.is_array() || static_cast<int>(arr.size()) != ctx.grids.state.dim()) {
      throw ConfigError(std::string("travel.") + key + " must match the state dimension");
    }
    for (Eigen::Index k = 0; k < dst.size(); ++k) dst[k] = arr[k].get<double>();
  };
  read_point("a", a);
  read_point("b", b);
  int steps = kInfiniteHorizon;
  if (params.contains("steps") && !params.at("steps").is_string()) {
    steps = params.at("steps").get<int>();
  }
  const bool relaxed = params.value("relaxed", false);
  const double p = params.contains("p") ? params.at("p").get<double>()
                                        : (relaxed ? ctx.ensure_penalty() : 0.0);
  TravelReport rep;
  const double value =
      cost_to_travel(ctx.model, ctx.grids, a, b, steps, relaxed, p, ctx.cfg.solver, &rep);
  json j;
  j["a"] = std::vector<double>(a.data(), a.data() + a.size());
  j["b"] = std::vector<double>(b.data(), b.data() + b.size());
  j["steps"] = steps == kInfiniteHorizon ? json("inf") : json(steps);
  j["relaxed"] = relaxed;
  if (relaxed) j["p"] = p;
  j["value"] = format_double(value);
  j["snapped"] = rep.snapped;
  j["snap_distance_cells"] = rep.snap_distance_cells;
  j["converged"] = rep.converged;
  ctx.write_file("travel_" + std::to_string(ctx.travel_counter++) + ".json",
                 j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Figure pipelines

double golden_ratio() { return 0.5 * (1.0 + std::sqrt(5.0)); }

void run_figure1(RunContext& ctx) {
  const SolveConfig solver = ctx.cfg.solver;
  ModelInstance narrow = make_model("lq");
  ModelInstance wide = make_model("lq-wide");
  GridBundle ng = default_grids(narrow);
  GridBundle wg = default_grids(wide);
  ValueSolution vp_narrow = solve_forward(narrow, ng, solver);
  ValueSolution vp_wide = solve_forward(wide, wg, solver);
  ctx.note_solver(vp_narrow);
  ctx.note_solver(vp_wide);

  const double phi = golden_ratio();
  StorageFunction lqr;
  lqr.label = "-V_lqr";
  lqr.field = make_field(ng.state, 0.0, "-V_lqr", FieldPolarity::max_type);
  for (int i = 0; i < ng.state.total; ++i) {
    const double x = ng.state.point(i)[0];
    lqr.field.values[i] = -phi * x * x;
  }
  StorageFunction l_narrow = storage_from_value(vp_narrow, "-V_plus_narrow");
  StorageFunction l_wide = storage_from_value(vp_wide, "-V_plus_wide");

  {
    std::ostringstream os;
    os << "x,u,L_unconstrained,L_narrow,L_wide\n";
    for (int i = 0; i < wg.state.total; ++i) {
      const Vec x = wg.state.point(i);
      for (int j = 0; j < wg.control.total; ++j) {
        const Vec u = wg.control.point(j);
        const double lu = rotated_cost(wide, lqr, x, u);
        const double ln = std::isfinite(l_narrow.field.values[i])
                              ? rotated_cost(wide, l_narrow, x, u)
                              : kInf;
        const double lw = rotated_cost(wide, l_wide, x, u);
        os << format_double(x[0]) << ',' << format_double(u[0]) << ',' << format_double(lu)
           << ',' << format_double(ln) << ',' << format_double(lw) << '\n';
      }
    }
    ctx.write_file("figure1_rotated_costs.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "x,u_lqr,u_plus_narrow,u_plus_wide\n";
    for (int i = 0; i < ng.state.total; ++i) {
      const double x = ng.state.point(i)[0];
      os << format_double(x) << ',' << format_double(-x / phi) << ',';
      auto un = policy_control(vp_narrow, ng.control, i);
      auto uw = policy_control(vp_wide, wg.control, i);
      os << (un ? format_double((*un)[0]) : std::string()) << ','
         << (uw ? format_double((*uw)[0]) : std::string()) << '\n';
    }
    ctx.write_file("figure1_feedback.csv", os.str());
  }

  // Certificates behind the figure: validity of each rotation on its own
  // constraint set, invalidity of the narrow rotation off it, value ordering.
  const double tol_n = certificate_tolerance(solver.tol, vp_narrow.value);
  const double tol_w = certificate_tolerance(solver.tol, vp_wide.value);
  ComparisonFunction none;
  auto rep_narrow = check_dissipativity(narrow, ng, l_narrow, DissKind::plain, none, tol_n);
  auto rep_wide = check_dissipativity(wide, wg, l_wide, DissKind::plain, none, tol_w);
  auto rep_cross = check_dissipativity(wide, wg, l_narrow, DissKind::plain, none, tol_n);
  // The narrow rotation must go strictly negative somewhere for |u| > 1.
  double min_off = kInf;
  for (int i = 0; i < wg.state.total; ++i) {
    if (!std::isfinite(l_narrow.field.values[i])) continue;
    const Vec x = wg.state.point(i);
    for (int j = 0; j < wg.control.total; ++j) {
      const Vec u = wg.control.point(j);
      if (std::abs(u[0]) <= 1.0) continue;
      const double L = rotated_cost(wide, l_narrow, x, u);
      if (std::isfinite(L)) min_off = std::min(min_off, L);
    }
  }
  double order_margin = -kInf;
  for (int i = 0; i < ng.state.total; ++i) {
    const double vn = vp_narrow.value.values[i];
    const double vw = vp_wide.value.values[i];
    if (!std::isfinite(vn) || !std::isfinite(vw)) continue;
    order_margin = std::max(order_margin, vw - vn);
  }
  ctx.record_certificate("figure1_narrow_rotation_valid", rep_narrow.pass);
  ctx.record_certificate("figure1_wide_rotation_valid", rep_wide.pass);
  ctx.record_certificate("figure1_narrow_rotation_invalid_off_box", min_off < -tol_n);
  ctx.record_certificate("figure1_value_ordering", order_margin <= 10.0 * solver.tol);

  json j;
  j["narrow_rotation_min_margin"] = format_double(rep_narrow.min_margin);
  j["wide_rotation_min_margin"] = format_double(rep_wide.min_margin);
  j["cross_rotation_min_margin"] = format_double(rep_cross.min_margin);
  j["narrow_rotation_min_off_box"] = format_double(min_off);
  j["value_ordering_max_excess"] = format_double(order_margin);
  j["tolerance_narrow"] = tol_n;
  j["tolerance_wide"] = tol_w;
  ctx.write_file("figure1_summary.json", j.dump(2) + "\n");
}

void run_figure2(RunContext& ctx) {
  ValueSolution& vplus = ctx.ensure_vplus();
  ValueSolution& vminus = ctx.ensure_vminus();
  ValueSolution& voplus = ctx.ensure_voplus();
  ValueSolution& vominus = ctx.ensure_vominus();
  {
    std::ostringstream os;
    write_solution_csv(os, vplus, ctx.grids.control);
    ctx.write_file("figure2_v_plus.csv", os.str());
  }
  {
    std::ostringstream os;
    write_solution_csv(os, vminus, ctx.grids.control);
    ctx.write_file("figure2_v_minus.csv", os.str());
  }

  LyapunovResult lyap = policy_evaluation_quadratic(ctx.model, ctx.grids, vplus, ctx.cfg.solver);
  Rotations rot = build_rotations(voplus, vominus, lyap.field);

  const StateGrid& sg = ctx.grids.state;
  const double du = ctx.grids.control.axes[0].spacing;
  std::ostringstream pol;
  pol << "x1,x2,u_plus,u_minus_after,coincide\n";
  std::ostringstream rots;
  rots << "x1,x2,L1_on_policy,L3_on_policy\n";
  long coincide_outside_band = 0;
  long coincide_count = 0;
  double min_gap = kInf;
  double l1_min = kInf;
  double l3_min_quad = kInf;
  for (int i = 0; i < sg.total; ++i) {
    if (!vplus.masked(i)) continue;
    const Vec x = sg.point(i);
    auto u_plus = policy_control(vplus, ctx.grids.control, i);
    if (!u_plus) continue;
    const Vec y = ctx.model.system.forward_map(x, *u_plus);
    auto u_minus = backward_policy_at(ctx.model, ctx.grids, vminus.value, y);
    const bool coincide = u_minus && std::abs((*u_minus)[0] - (*u_plus)[0]) <= du + 1e-12;
    if (coincide) {
      coincide_count += 1;
      if (std::abs(x[1]) > sg.axes[1].spacing + 1e-12) coincide_outside_band += 1;
    }
    pol << format_double(x[0]) << ',' << format_double(x[1]) << ','
        << format_double((*u_plus)[0]) << ','
        << (u_minus ? format_double((*u_minus)[0]) : std::string()) << ','
        << (coincide ? 1 : 0) << '\n';

    const double l1 = rotated_cost(ctx.model, rot.l1, x, *u_plus);
    double l3 = kInf;
    if (std::isfinite(rot.l3.field.values[i])) {
      l3 = rotated_cost(ctx.model, rot.l3, x, *u_plus);
    }
    rots << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(l1)
         << ',' << format_double(l3) << '\n';
    if (std::isfinite(l1)) l1_min = std::min(l1_min, l1);
    if (std::isfinite(l3) && i != sg.origin_flat()) {
      l3_min_quad = std::min(l3_min_quad, l3 - x.squaredNorm());
    }
    if (vminus.masked(i) && i != sg.origin_flat()) {
      min_gap = std::min(min_gap, vplus.value.values[i] - vminus.value.values[i]);
    }
  }
  ctx.write_file("figure2_policies.csv", pol.str());
  ctx.write_file("figure2_rotated.csv", rots.str());

  const double tol = certificate_tolerance(ctx.cfg.solver.tol, vominus.value);
  ctx.record_certificate("figure2_value_gap_positive", min_gap > 0.0);
  ctx.record_certificate("figure2_coincidence_on_band", coincide_outside_band == 0);
  ctx.record_certificate("figure2_l1_nonnegative_on_policy", l1_min >= -tol);
  ctx.record_certificate("figure2_l3_quadratic_on_policy", l3_min_quad >= -tol);

  json j;
  j["min_value_gap_off_origin"] = format_double(min_gap);
  j["coincidence_count"] = coincide_count;
  j["coincidence_outside_band"] = coincide_outside_band;
  j["l1_on_policy_min"] = format_double(l1_min);
  j["l3_on_policy_min_minus_sq"] = format_double(l3_min_quad);
  j["lyapunov_diverged"] = lyap.diverged;
  j["penalty"] = ctx.ensure_penalty();
  j["tolerance"] = tol;
  ctx.write_file("figure2_summary.json", j.dump(2) + "\n");
}

void run_figure3(RunContext& ctx) {
  ValueSolution& vplus = ctx.ensure_vplus();
  ValueSolution& vominus = ctx.ensure_vominus();
  const std::vector<double> rs = {0.1, 0.5, 1.0, 2.0};
  const int n_max = 20;
  std::ostringstream prof;
  prof << "terminal,r,N,gap\n";
  std::ostringstream ns_csv;
  ns_csv << "terminal,r,Ns\n";
  json summary = json::object();
  for (TerminalKind kind : {TerminalKind::vf1, TerminalKind::vf2}) {
    for (double r : rs) {
      TerminalCostSpec spec = terminal_spec(kind, r);
      ExtendedField terminal =
          build_terminal_cost(spec, &vplus.value, &vominus.value, ctx.grids);
      const std::string tag = kind == TerminalKind::vf1 ? "vf1" : "vf2";
      auto gaps = convergence_profile(ctx.model, ctx.grids, terminal, vplus, n_max);
      for (size_t i = 0; i < gaps.size(); ++i) {
        prof << tag << ',' << format_double(r) << ',' << i + 1 << ','
             << format_double(gaps[i]) << '\n';
      }
      auto ns = min_stabilizing_horizon(ctx.model, ctx.grids, terminal, vplus, n_max);
      ns_csv << tag << ',' << format_double(r) << ','
             << (ns ? std::to_string(*ns) : std::string("none")) << '\n';
      summary[tag + "_r" + format_double(r)] = ns ? json(*ns) : json("none");
    }
  }
  ctx.write_file("figure3_profiles.csv", prof.str());
  ctx.write_file("figure3_ns.csv", ns_csv.str());
  json j;
  j["stabilizing_horizons"] = summary;
  j["penalty"] = ctx.ensure_penalty();
  ctx.write_file("figure3_summary.json", j.dump(2) + "\n");
}

void run_figure(RunContext& ctx, const json& params) {
  const int n = params.value("n", 1);
  if (n == 1) {
    run_figure1(ctx);
  } else if (n == 2) {
    run_figure2(ctx);
  } else if (n == 3) {
    run_figure3(ctx);
  } else {
    throw ConfigError("figure.n must be 1, 2, or 3");
  }
}

}  // namespace

RunResult run(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (opts.threads > 0) set_thread_count(opts.threads);
  RunContext ctx;
  ctx.cfg = cfg;
  ctx.out = opts.output_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opts.output_dir);
  RunResult result;
  try {
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw IoError("cannot create output directory " + ctx.out.string());
    // Figures 2 and 3 are defined on the nonlinear example; figure 1 builds
    // its own lq models. Other experiments use the configured model.
    bool needs_model = false;
    for (const auto& e : cfg.experiments) needs_model = needs_model || e.kind != "figure";
    for (const auto& e : cfg.experiments) {
      if (e.kind == "figure" && e.params.value("n", 1) != 1) needs_model = true;
    }
    std::string model_name = cfg.model_name;
    for (const auto& e : cfg.experiments) {
      if (e.kind == "figure" && e.params.value("n", 1) != 1) model_name = "nonlinear";
    }
    if (needs_model) {
      ctx.model = make_model(model_name, cfg.overrides);
      ExperimentConfig grid_cfg = cfg;
      if (model_name != cfg.model_name) {
        grid_cfg.state_nodes.clear();
        grid_cfg.control_nodes.clear();
      }
      ctx.grids = grids_for(ctx.model, grid_cfg);
    }
    for (const auto& e : cfg.experiments) {
      const auto started = std::chrono::steady_clock::now();
      if (e.kind == "solve") {
        run_solve(ctx, e.params);
      } else if (e.kind == "certify") {
        run_certify(ctx, e.params);
      } else if (e.kind == "mpc") {
        run_mpc(ctx, e.params);
      } else if (e.kind == "travel") {
        run_travel(ctx, e.params);
      } else if (e.kind == "figure") {
        run_figure(ctx, e.params);
      } else {
        throw ConfigError("unknown experiment kind \"" + e.kind + "\"");
      }
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
      std::string label = e.kind;
      if (e.kind == "figure") label += ":" + std::to_string(e.params.value("n", 1));
      ctx.wall_times[label] = elapsed.count();
    }
  } catch (const IoError&) {
    result.exit_code = 4;
  }
  if (result.exit_code == 0) {
    if (ctx.solver_failure) {
      result.exit_code = 2;
    } else if (ctx.cert_failure && opts.strict) {
      result.exit_code = 3;
    }
  }
  json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = config_to_json(cfg);
  manifest["wall_times_seconds"] = ctx.wall_times;
  manifest["certificates"] = ctx.certificates;
  manifest["files"] = ctx.files;
  manifest["exit_code"] = result.exit_code;
  result.manifest_json = manifest.dump(2) + "\n";
  result.files = ctx.file_list;
  try {
    std::ofstream os(ctx.out / "manifest.json", std::ios::binary);
    os << result.manifest_json;
  } catch (...) {
    if (result.exit_code == 0) result.exit_code = 4;
  }
  return result;
}

std::string models_json() {
  json arr = json::array();
  for (const auto& m : list_models()) {
    json j;
    j["name"] = m.name;
    j["state_dim"] = m.state_dim;
    j["control_dim"] = m.control_dim;
    j["state_lower"] = std::vector<double>(m.state_lower.data(),
                                           m.state_lower.data() + m.state_lower.size());
    j["state_upper"] = std::vector<double>(m.state_upper.data(),
                                           m.state_upper.data() + m.state_upper.size());
    j["control_lower"] = std::vector<double>(m.control_lower.data(),
                                             m.control_lower.data() + m.control_lower.size());
    j["control_upper"] = std::vector<double>(m.control_upper.data(),
                                             m.control_upper.data() + m.control_upper.size());
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

}  // namespace empc
