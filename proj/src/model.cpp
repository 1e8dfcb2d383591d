#include "empc/model.hpp"

#include <cmath>
#include <sstream>

namespace empc {

namespace {

void check_dims(const ModelInstance& model, const Vec& x, const Vec& u, const char* what) {
  if (x.size() != model.system.state_dim || u.size() != model.system.control_dim) {
    std::ostringstream os;
    os << what << ": dimension mismatch (got state " << x.size() << ", control " << u.size()
       << "; expected " << model.system.state_dim << ", " << model.system.control_dim << ")";
    throw ContractViolation(os.str());
  }
}

bool inside_box(const Vec& v, const Vec& lo, const Vec& hi) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] < lo[i] - 1e-12 || v[i] > hi[i] + 1e-12) return false;
  }
  return true;
}

// Monotone scalar component of the nonlinear example: 2*a + (a-1)^3.
double cubic_part(double a) { return 2.0 * a + std::pow(a - 1.0, 3); }
double cubic_part_deriv(double a) { return 2.0 + 3.0 * (a - 1.0) * (a - 1.0); }

// Solves cubic_part(a) = rhs by bracketed bisection refined with Newton steps.
// The bracket is the state box inflated by a factor of two.
std::optional<double> solve_cubic_part(double rhs, double lo, double hi) {
  double a = 2.0 * lo, b = 2.0 * hi;
  double fa = cubic_part(a) - rhs;
  double fb = cubic_part(b) - rhs;
  if (fa > 0.0 || fb < 0.0) return std::nullopt;  // strictly increasing, no bracket
  double mid = 0.5 * (a + b);
  for (int it = 0; it < 80 && b - a > 1e-13 * (1.0 + std::abs(mid)); ++it) {
    mid = 0.5 * (a + b);
    double fm = cubic_part(mid) - rhs;
    if (fm <= 0.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  double x = 0.5 * (a + b);
  for (int it = 0; it < 4; ++it) {
    double fx = cubic_part(x) - rhs;
    x -= fx / cubic_part_deriv(x);
  }
  return x;
}

ModelInstance build_lq(const Vec& ulo, const Vec& uhi, const std::string& name) {
  ModelInstance m;
  m.name = name;
  m.system.state_dim = 1;
  m.system.control_dim = 1;
  m.system.forward_map = [](const Vec& x, const Vec& u) { return Vec(x + u); };
  m.system.inverse_map = [](const Vec& y, const Vec& u) { return Vec(y - u); };
  m.system.inverse_method = InverseMethod::closed_form;
  m.cost.eval = [](const Vec& x, const Vec& u) { return x[0] * x[0] + u[0] * u[0]; };
  m.constraints.kind = ConstraintKind::box;
  m.constraints.state_lower = scalar_vec(-10.0);
  m.constraints.state_upper = scalar_vec(10.0);
  m.constraints.control_lower = ulo;
  m.constraints.control_upper = uhi;
  return m;
}

ModelInstance build_nonlinear() {
  ModelInstance m;
  m.name = "nonlinear";
  m.system.state_dim = 2;
  m.system.control_dim = 1;
  m.system.forward_map = [](const Vec& x, const Vec& u) {
    Vec y(2);
    y[0] = 2.0 * x[0] + std::pow(x[0] - 1.0, 3) + 1.0 + x[1];
    y[1] = x[1] + u[0];
    return y;
  };
  m.system.inverse_method = InverseMethod::monotone_root_find;
  m.cost.eval = [](const Vec& x, const Vec& u) {
    return x[1] * x[1] + x[0] + std::pow(x[0] - 1.0, 3) + 1.0 + x[1] - u[0];
  };
  m.constraints.kind = ConstraintKind::box;
  m.constraints.state_lower = make_vec({-2.0, -10.0});
  m.constraints.state_upper = make_vec({2.0, 10.0});
  m.constraints.control_lower = scalar_vec(-10.0);
  m.constraints.control_upper = scalar_vec(10.0);
  // x2 inverts in closed form; x1 needs the monotone root find, wired below
  // because it depends on the (possibly overridden) state box.
  return m;
}

void attach_nonlinear_inverse(ModelInstance& m) {
  const double lo = m.constraints.state_lower[0];
  const double hi = m.constraints.state_upper[0];
  m.system.inverse_map = [lo, hi](const Vec& y, const Vec& u) {
    Vec x(2);
    x[1] = y[1] - u[0];
    const double rhs = y[0] - 1.0 - x[1];
    auto root = solve_cubic_part(rhs, lo, hi);
    if (!root) {
      throw InversionFailure("inverse dynamics: no bracket inside twice-inflated state box");
    }
    x[0] = *root;
    return x;
  };
}

}  // namespace

Vec eval_dynamics(const ModelInstance& model, const Vec& x, const Vec& u) {
  check_dims(model, x, u, "eval_dynamics");
  return model.system.forward_map(x, u);
}

Vec eval_inverse_dynamics(const ModelInstance& model, const Vec& y, const Vec& u) {
  check_dims(model, y, u, "eval_inverse_dynamics");
  if (model.system.inverse_method == InverseMethod::unavailable || !model.system.inverse_map) {
    throw ContractViolation("eval_inverse_dynamics: model has no inverse dynamics");
  }
  return model.system.inverse_map(y, u);
}

std::optional<Vec> try_inverse_dynamics(const ModelInstance& model, const Vec& y, const Vec& u) {
  if (model.system.inverse_method == InverseMethod::unavailable || !model.system.inverse_map) {
    return std::nullopt;
  }
  try {
    return model.system.inverse_map(y, u);
  } catch (const InversionFailure&) {
    return std::nullopt;
  }
}

OriginReport verify_origin_steady_state(const ModelInstance& model) {
  OriginReport r;
  Vec x0 = Vec::Zero(model.system.state_dim);
  Vec u0 = Vec::Zero(model.system.control_dim);
  r.f_residual = model.system.forward_map(x0, u0).cwiseAbs().maxCoeff();
  r.cost_residual = std::abs(model.cost.eval(x0, u0));
  r.pass = r.f_residual <= 1e-12 && r.cost_residual <= 1e-12 && admissible(model, x0, u0);
  return r;
}

bool admissible(const ModelInstance& model, const Vec& x, const Vec& u) {
  const auto& c = model.constraints;
  if (!inside_box(x, c.state_lower, c.state_upper)) return false;
  if (!inside_box(u, c.control_lower, c.control_upper)) return false;
  if (c.predicate && !c.predicate(x, u)) return false;
  return true;
}

ModelInstance make_model(const std::string& name, const ModelOverrides& overrides) {
  ModelInstance m;
  if (name == "lq") {
    m = build_lq(scalar_vec(-1.0), scalar_vec(1.0), "lq");
  } else if (name == "lq-wide") {
    m = build_lq(scalar_vec(-2.0), scalar_vec(2.0), "lq-wide");
  } else if (name == "nonlinear") {
    m = build_nonlinear();
  } else {
    throw ContractViolation("unknown model \"" + name +
                            "\" (registry: lq, lq-wide, nonlinear)");
  }
  auto apply = [](std::optional<Vec> src, Vec& dst, const char* what, Eigen::Index dim) {
    if (!src) return;
    if (src->size() != dim) {
      throw ContractViolation(std::string("override ") + what + ": wrong dimension");
    }
    dst = *src;
  };
  apply(overrides.state_lower, m.constraints.state_lower, "state_lower", m.system.state_dim);
  apply(overrides.state_upper, m.constraints.state_upper, "state_upper", m.system.state_dim);
  apply(overrides.control_lower, m.constraints.control_lower, "control_lower",
        m.system.control_dim);
  apply(overrides.control_upper, m.constraints.control_upper, "control_upper",
        m.system.control_dim);
  for (Eigen::Index i = 0; i < m.constraints.state_lower.size(); ++i) {
    if (m.constraints.state_lower[i] > m.constraints.state_upper[i]) {
      throw ContractViolation("state box has lower > upper");
    }
  }
  for (Eigen::Index i = 0; i < m.constraints.control_lower.size(); ++i) {
    if (m.constraints.control_lower[i] > m.constraints.control_upper[i]) {
      throw ContractViolation("control box has lower > upper");
    }
  }
  if (name == "nonlinear") attach_nonlinear_inverse(m);
  auto origin = verify_origin_steady_state(m);
  if (!origin.pass) {
    throw ContractViolation("model \"" + name + "\" is not origin-normalized");
  }
  return m;
}

std::vector<ModelSummary> list_models() {
  std::vector<ModelSummary> out;
  for (const char* name : {"lq", "lq-wide", "nonlinear"}) {
    ModelInstance m = make_model(name);
    out.push_back({m.name, m.system.state_dim, m.system.control_dim, m.constraints.state_lower,
                   m.constraints.state_upper, m.constraints.control_lower,
                   m.constraints.control_upper});
  }
  return out;
}

}  // namespace empc
