#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "empc/grid.hpp"
#include "empc/model.hpp"

namespace empc {

struct GridBundle {
  StateGrid state;
  ControlGrid control;
};

// Grids covering the model's boxes; node counts default per registered model.
GridBundle default_grids(const ModelInstance& model);
GridBundle make_grids(const ModelInstance& model, const std::vector<int>& state_nodes,
                      const std::vector<int>& control_nodes);

struct PenaltySetting {
  bool auto_mode = true;
  double value = 0.0;
};

struct SolveConfig {
  double tol = 1e-6;      // sup-norm Bellman residual threshold on finite nodes
  int max_iter = 10000;
  PenaltySetting penalty;
  // The equality terminal constraint {0} is seeded as the steep cone
  // seed_slope * ||x||_1 rather than a literal indicator: the cone dominates
  // every admissible continuation cost, so value iteration collapses it onto
  // the exact value function, while a +inf indicator cannot propagate through
  // interpolation cells off the lattice. Converged values above
  // feasible_threshold are reported as infeasible.
  double seed_slope = 1e4;
  double feasible_threshold = 1e6;
};

struct ValueSolution {
  ExtendedField value;
  std::vector<int32_t> policy;      // optimal control node per state node, -1 if none
  std::vector<uint8_t> domain_mask; // finite-value set
  int iterations = 0;
  double residual = kInf;
  bool converged = false;
  bool backward = false;
  std::vector<double> residual_history;

  bool masked(int node) const { return domain_mask[node] != 0; }
};

// Precomputed Bellman backup data: per (state node, control node) pair the
// stage cost and the interpolation cell of the successor (forward tables) or
// predecessor (backward tables). cell < 0 encodes out-of-box (-1) and
// inadmissible (-2) pairs.
struct BellmanTable {
  StateGrid sgrid;
  ControlGrid cgrid;
  int n_nodes = 0;
  int n_controls = 0;
  int dim = 0;
  bool backward = false;
  std::vector<double> stage;
  std::vector<int32_t> cell;
  std::vector<double> frac;
};

using StageFn = std::function<double(const Vec&, const Vec&)>;

BellmanTable make_forward_table(const ModelInstance& model, const GridBundle& grids,
                                const StageFn* stage_override = nullptr);
BellmanTable make_backward_table(const ModelInstance& model, const GridBundle& grids);

// One Jacobi backup of min over controls of stage + interp(values, target).
// Writes v_out and the argmin control index (lexicographic tie-break).
void bellman_sweep(const BellmanTable& table, const std::vector<double>& interp_values,
                   std::vector<double>& v_out, std::vector<int32_t>* policy);

// Nodes from which the table's transitions can drive the state into the cell
// block of the given radius around the target node: the grid realization of
// the equality terminal constraint at grid resolution (the default radius
// matches the closed-loop convergence ball). A node joins the set when some
// control lands every contributing interpolation vertex inside it. Nodes
// outside can at best circulate without terminating and are excluded from the
// strict solves up front.
std::vector<uint8_t> reachable_set(const BellmanTable& table, int target_node,
                                   int radius_cells = 2);

// Sup-norm Bellman residual of `values` under the table's backup.
double bellman_residual(const BellmanTable& table, const std::vector<double>& values,
                        double conv_p = 0.0);

ValueSolution solve_forward(const ModelInstance& model, const GridBundle& grids,
                            const SolveConfig& cfg);
ValueSolution solve_backward(const ModelInstance& model, const GridBundle& grids,
                             const SolveConfig& cfg);
ValueSolution solve_forward_relaxed(const ModelInstance& model, const GridBundle& grids,
                                    const SolveConfig& cfg, double p,
                                    const ExtendedField* warm_start = nullptr);
ValueSolution solve_backward_relaxed(const ModelInstance& model, const GridBundle& grids,
                                     const SolveConfig& cfg, double p,
                                     const ExtendedField* warm_start = nullptr);

struct CalibrationStep {
  double p;
  double forward_gap;
  double backward_gap;
  bool exact;
};

struct CalibrationReport {
  std::vector<CalibrationStep> steps;
  double p = 0.0;
  ValueSolution forward_relaxed;
  ValueSolution backward_relaxed;
};

// Doubles p from 1 until the relaxed value functions match the exact ones to
// 10*tol on their finite masks for two consecutive doublings; returns the
// first such p. Throws CalibrationFailure past 2^20.
double calibrate_penalty(const ModelInstance& model, const GridBundle& grids,
                         const SolveConfig& cfg, const ValueSolution& vplus,
                         const ValueSolution& vminus, CalibrationReport* report = nullptr);
double calibrate_penalty(const ModelInstance& model, const GridBundle& grids,
                         const SolveConfig& cfg, CalibrationReport* report = nullptr);

// Finite-horizon value iteration from a terminal field; returns V_1..V_N.
std::vector<ValueSolution> value_iterate_finite(const ModelInstance& model,
                                                const GridBundle& grids,
                                                const ExtendedField& terminal, int N,
                                                const StageFn* stage_override = nullptr);

struct TravelReport {
  bool snapped = false;
  double snap_distance_cells = 0.0;
  Vec target_node;
  bool converged = true;
  int iterations = 0;
};

inline constexpr int kInfiniteHorizon = -1;

double cost_to_travel(const ModelInstance& model, const GridBundle& grids, const Vec& a,
                      const Vec& b, int N, bool relaxed, double p, const SolveConfig& cfg,
                      TravelReport* report = nullptr);

struct SplitResult {
  int M = 0;
  double value = kInf;
};

// argmin over M in {1..N-1} of C(x,0,N-M) + C_r(0,x,M); ties toward smaller M.
SplitResult optimal_split(const ModelInstance& model, const GridBundle& grids, const Vec& x,
                          int N, double p, const SolveConfig& cfg);

Vec control_at(const ControlGrid& grid, int flat_index);

// Control vector chosen by a solution's policy at a state node.
std::optional<Vec> policy_control(const ValueSolution& sol, const ControlGrid& cgrid, int node);

// One Bellman step at a continuous state: argmin_u of l(x,u) + V(f(x,u)).
std::optional<Vec> forward_policy_at(const ModelInstance& model, const GridBundle& grids,
                                     const ExtendedField& value, const Vec& x);

// Backward-optimal control applied at the predecessor of y:
// argmax_u of -l(f^{-1}(y,u), u) + V_minus(f^{-1}(y,u)).
std::optional<Vec> backward_policy_at(const ModelInstance& model, const GridBundle& grids,
                                      const ExtendedField& v_minus, const Vec& y);

}  // namespace empc
