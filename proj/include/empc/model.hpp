#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "empc/types.hpp"

namespace empc {

enum class InverseMethod { closed_form, monotone_root_find, unavailable };

struct ControlSystem {
  int state_dim = 0;
  int control_dim = 0;
  std::function<Vec(const Vec&, const Vec&)> forward_map;
  std::function<Vec(const Vec&, const Vec&)> inverse_map;  // empty when unavailable
  InverseMethod inverse_method = InverseMethod::unavailable;
};

struct StageCost {
  std::function<double(const Vec&, const Vec&)> eval;
};

enum class ConstraintKind { box, predicate };

struct ConstraintSet {
  ConstraintKind kind = ConstraintKind::box;
  Vec state_lower, state_upper;
  Vec control_lower, control_upper;
  // Optional predicate evaluated on top of the box; empty means box-only.
  std::function<bool(const Vec&, const Vec&)> predicate;
};

struct ModelInstance {
  ControlSystem system;
  StageCost cost;
  ConstraintSet constraints;
  std::string name;
};

struct OriginReport {
  double f_residual = 0.0;
  double cost_residual = 0.0;
  bool pass = false;
};

Vec eval_dynamics(const ModelInstance& model, const Vec& x, const Vec& u);

// Solves f(x, u) = y for x. Throws InversionFailure when no bracket exists
// inside the state box inflated by a factor of two.
Vec eval_inverse_dynamics(const ModelInstance& model, const Vec& y, const Vec& u);

// Non-throwing variant used by the DP table builders.
std::optional<Vec> try_inverse_dynamics(const ModelInstance& model, const Vec& y, const Vec& u);

OriginReport verify_origin_steady_state(const ModelInstance& model);

bool admissible(const ModelInstance& model, const Vec& x, const Vec& u);

// Numeric overrides for the registered models (box bounds only).
struct ModelOverrides {
  std::optional<Vec> state_lower, state_upper;
  std::optional<Vec> control_lower, control_upper;
};

// Registered models: "lq", "lq-wide", "nonlinear". Construction verifies the
// origin normalization and throws ContractViolation otherwise.
ModelInstance make_model(const std::string& name, const ModelOverrides& overrides = {});

struct ModelSummary {
  std::string name;
  int state_dim;
  int control_dim;
  Vec state_lower, state_upper;
  Vec control_lower, control_upper;
};

std::vector<ModelSummary> list_models();

}  // namespace empc
