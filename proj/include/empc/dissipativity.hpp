#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "empc/dp.hpp"

namespace empc {

struct StorageFunction {
  ExtendedField field;
  std::string label;
};

// lambda = -V for the given value solution.
StorageFunction storage_from_value(const ValueSolution& sol, std::string label);
StorageFunction zero_storage(const StateGrid& grid, std::string label = "zero");

struct ComparisonFunction {
  enum class Form { quadratic, scaled_norm, custom };
  Form form = Form::quadratic;
  double coefficient = 0.0;
  std::function<double(double)> custom;

  double operator()(double s) const;
  static ComparisonFunction quadratic(double c);
  static ComparisonFunction scaled_norm(double c);
};

enum class DissKind { plain, strict };

struct PairViolation {
  Vec x;
  Vec u;
  double rotated = 0.0;
  double required = 0.0;
};

struct DissipativityReport {
  double min_margin = kInf;
  long violation_count = 0;
  Vec argmin_x, argmin_u;
  double fitted_coefficient = 0.0;
  bool pass = false;
  long pairs_checked = 0;
  double tol = 0.0;
  std::vector<PairViolation> violations;  // worst offenders, capped
};

// Rotated stage cost l(x,u) + lambda(x) - lambda(f(x,u)); +inf when f leaves
// the grid box or lands in an infinite lambda cell.
double rotated_cost(const ModelInstance& model, const StorageFunction& lambda, const Vec& x,
                    const Vec& u);

// Default discretization-aware tolerance for certificate checks:
// 10x the DP tolerance plus one interpolation-error estimate
// (max cell diameter times a local Lipschitz estimate of the field).
double certificate_tolerance(double dp_tol, const ExtendedField& field);

DissipativityReport check_dissipativity(const ModelInstance& model, const GridBundle& grids,
                                        const StorageFunction& lambda, DissKind kind,
                                        const ComparisonFunction& rho, double tol);

DissipativityReport check_two_storage(const ModelInstance& model, const GridBundle& grids,
                                      const StorageFunction& lambda1,
                                      const StorageFunction& lambda2,
                                      const ComparisonFunction& gamma, double tol);

enum class BoundKind { plain, strict, two_storage };

DissipativityReport verify_value_bounds(const ExtendedField& v_plus,
                                        const ExtendedField& v_minus,
                                        const StorageFunction& lambda, BoundKind kind,
                                        const ComparisonFunction& comparison, double tol);

// Grid nodes x != 0 where V+ and V- coincide within tol (both finite).
std::vector<Vec> detect_strictness_obstruction(const ExtendedField& v_plus,
                                               const ExtendedField& v_minus, double tol);

struct LyapunovResult {
  ExtendedField field;
  bool diverged = false;
  double growth = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Solves W(x) = ||x||^2 + W(f(x, policy(x))) by fixed-point iteration from
// zero on the policy's domain; the result decreases by exactly ||x||^2 along
// the closed loop. Divergence is flagged, not thrown.
LyapunovResult policy_evaluation_quadratic(const ModelInstance& model, const GridBundle& grids,
                                           const ValueSolution& policy_source,
                                           const SolveConfig& cfg);

struct Rotations {
  StorageFunction l1;  // -V_ominus
  StorageFunction l2;  // -V_oplus
  StorageFunction l3;  // l1 + quadratic Lyapunov function
};

Rotations build_rotations(const ValueSolution& v_oplus, const ValueSolution& v_ominus,
                          const ExtendedField& lyapunov);

// beta(a) - beta(b) <= a - b + tol over all sampled pairs a > b >= 0.
bool check_beta_property(const std::function<double(double)>& beta,
                         std::span<const std::pair<double, double>> sample_pairs,
                         double tol = 1e-9);

// Log-spaced sample pairs over (0, max_gap] for check_beta_property.
std::vector<std::pair<double, double>> beta_sample_pairs(double max_gap, int count = 64);

// Stage cost rotated by lambda, usable as a value_iterate_finite override.
StageFn make_rotated_stage(const ModelInstance& model, const StorageFunction& lambda);

// Executable form of the strict-to-two-storage construction: given a storage
// function passing strict dissipativity with rho, checks the derived pair
// (lambda, lambda - rho(||x||)) for two-storage dissipativity with gamma=rho.
DissipativityReport strict_implies_two_storage(const ModelInstance& model,
                                               const GridBundle& grids,
                                               const StorageFunction& lambda,
                                               const ComparisonFunction& rho, double tol);

}  // namespace empc
