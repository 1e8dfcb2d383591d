#pragma once

#include <string>
#include <vector>

#include "empc/types.hpp"

namespace empc {

// Uniformly spaced node set covering [lo, hi] with the origin on a node.
struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
  double spacing = 0.0;
  int origin_index = -1;
  std::vector<double> nodes;
};

Axis make_axis(double lo, double hi, int n);

struct RectGrid {
  std::vector<Axis> axes;
  std::vector<int> strides;  // row-major over dimensions
  int total = 0;

  int dim() const { return static_cast<int>(axes.size()); }
  int flat(const std::vector<int>& idx) const;
  std::vector<int> unflat(int flat_index) const;
  Vec point(int flat_index) const;
  int origin_flat() const;
  int nearest_flat(const Vec& x, double* max_cell_dist = nullptr) const;
  bool contains(const Vec& x) const;
  double max_cell_diameter() const;
  bool compatible(const RectGrid& other) const;
};

using StateGrid = RectGrid;
using ControlGrid = RectGrid;

StateGrid make_state_grid(const Vec& lo, const Vec& hi, const std::vector<int>& node_counts);
ControlGrid make_control_grid(const Vec& lo, const Vec& hi, const std::vector<int>& node_counts);

// Whether a value field is a lower (min-type) or upper (max-type) envelope.
// Queries outside the bounding box return +inf for min-type fields and -inf
// for max-type fields.
enum class FieldPolarity { min_type, max_type };

struct ExtendedField {
  StateGrid grid;
  std::vector<double> values;  // one per node, may hold +/-inf
  std::string label;
  FieldPolarity polarity = FieldPolarity::min_type;

  double at(int flat_index) const { return values[flat_index]; }
};

ExtendedField make_field(const StateGrid& grid, double fill, std::string label,
                         FieldPolarity polarity = FieldPolarity::min_type);

// Cell locator shared by the interpolation paths. frac[k] in [0,1] is the
// coordinate inside the cell along dimension k, snapped to {0,1} within
// kSnapEps; base is the flat index of the low corner.
struct CellRef {
  int base = -1;
  double frac[kMaxDim] = {0, 0, 0, 0};
  bool inside = false;
};

CellRef locate_cell(const StateGrid& grid, const Vec& x);

// Multilinear interpolation from a located cell. Vertices with zero weight
// are ignored; a cell mixing +inf and -inf among contributing vertices
// throws DataCorruption.
double interpolate_cell(const StateGrid& grid, const std::vector<double>& values,
                        const CellRef& cell);

double interpolate(const ExtendedField& field, const Vec& x);

// min over grid nodes y of field(y) + p * ||x - y||_1, computed exactly by
// one forward and one backward sweep per dimension.
ExtendedField inf_convolve_l1(const ExtendedField& field, double p);

// Raw-buffer form of the same sweep, used inside the DP iteration.
void inf_convolve_l1_inplace(const RectGrid& grid, std::vector<double>& values, double p);

// max over grid nodes y of field(y) - p * ||x - y||_1.
ExtendedField sup_convolve_l1(const ExtendedField& field, double p);

ExtendedField negate(const ExtendedField& field, std::string label = "");

}  // namespace empc
