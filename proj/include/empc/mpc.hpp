#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "empc/dp.hpp"

namespace empc {

enum class TerminalKind { origin_indicator, v_plus, v_ominus, vf1, vf2, beta_composite, amrit };

struct TerminalCostSpec {
  TerminalKind kind = TerminalKind::origin_indicator;
  double r = 0.0;
  std::function<double(double)> beta;  // beta_composite; default a/(1+a)
  ExtendedField amrit_field;
  Vec terminal_lower, terminal_upper;  // amrit terminal box
};

TerminalCostSpec terminal_spec(TerminalKind kind, double r = 0.0);

// Builds the terminal cost field; v_plus / v_ominus are required per kind.
ExtendedField build_terminal_cost(const TerminalCostSpec& spec, const ExtendedField* v_plus,
                                  const ExtendedField* v_ominus, const GridBundle& grids);

struct AmritReport {
  bool pass = false;
  long nodes_checked = 0;
  long decrease_violations = 0;
  long admissibility_violations = 0;
  long invariance_violations = 0;
  double max_decrease_margin = -kInf;  // max over nodes of Vf(f)-Vf(x)+l(x,u)
};

// Verifies the terminal decrease condition, admissibility of the terminal
// control law, and invariance of the terminal box on all grid nodes inside it.
AmritReport check_amrit_condition(const ModelInstance& model, const GridBundle& grids,
                                  const ExtendedField& v_f,
                                  const std::function<Vec(const Vec&)>& kappa_f,
                                  const Vec& box_lower, const Vec& box_upper, double tol);

// Receding-horizon feedback: argmin over control nodes of
// l(x,u) + interp(v_tail, f(x,u)); nullopt when every control is infeasible.
std::optional<Vec> mpc_feedback(const ModelInstance& model, const GridBundle& grids,
                                const ExtendedField& v_tail, const Vec& x);

struct SimParams {
  int max_steps = 500;
  // Convergence ball, in grid cells per dimension. Quantized feedback cannot
  // park tighter than the control-lattice limit cycle (about 7 cells on the
  // nonlinear example), so the ball must sit above that floor.
  double radius_cells = 8.0;
  int dwell = 10;  // consecutive steps inside the ball
  bool record_trajectory = true;
};

struct ClosedLoopResult {
  std::vector<Vec> trajectory;
  std::vector<Vec> inputs;
  bool converged = false;
  double accumulated_cost = 0.0;
  std::optional<int> infeasible_at;
  int steps = 0;
};

ClosedLoopResult simulate_closed_loop(const ModelInstance& model, const GridBundle& grids,
                                      const ExtendedField& v_tail, const Vec& x0,
                                      const SimParams& params = {});

// Horizon-N wrapper: value-iterates the terminal cost N-1 times and simulates
// with the resulting tail.
ClosedLoopResult simulate_closed_loop_horizon(const ModelInstance& model,
                                              const GridBundle& grids,
                                              const ExtendedField& terminal, int N,
                                              const Vec& x0, const SimParams& params = {});

// Smallest N <= n_max whose closed loop converges from every state-grid node
// with finite V+; nullopt when none does.
std::optional<int> min_stabilizing_horizon(const ModelInstance& model, const GridBundle& grids,
                                           const ExtendedField& terminal,
                                           const ValueSolution& v_plus, int n_max,
                                           const SimParams& params = {});

// max over the V+ mask of |V_N - V+| for N = 1..n_max.
std::vector<double> convergence_profile(const ModelInstance& model, const GridBundle& grids,
                                        const ExtendedField& terminal,
                                        const ValueSolution& v_plus, int n_max);

}  // namespace empc
