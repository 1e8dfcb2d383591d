#include "empc/grid.hpp"

#include <cmath>
#include <sstream>

namespace empc {

Axis make_axis(double lo, double hi, int n) {
  if (n < 3) throw ContractViolation("grid axis needs at least 3 nodes");
  if (!(lo < hi)) throw ContractViolation("grid axis needs lo < hi");
  Axis a;
  a.lo = lo;
  a.hi = hi;
  a.n = n;
  a.spacing = (hi - lo) / static_cast<double>(n - 1);
  const double origin_pos = (0.0 - lo) / a.spacing;
  const int k = static_cast<int>(std::lround(origin_pos));
  if (k < 0 || k >= n || std::abs(origin_pos - k) > 1e-9) {
    std::ostringstream os;
    os << "grid axis [" << lo << ", " << hi << "] with " << n << " nodes does not place the origin on a node";
    throw ContractViolation(os.str());
  }
  a.origin_index = k;
  a.nodes.resize(n);
  for (int i = 0; i < n; ++i) a.nodes[i] = lo + i * a.spacing;
  a.nodes[0] = lo;
  a.nodes[n - 1] = hi;
  a.nodes[k] = 0.0;
  return a;
}

int RectGrid::flat(const std::vector<int>& idx) const {
  int f = 0;
  for (size_t k = 0; k < axes.size(); ++k) f += idx[k] * strides[k];
  return f;
}

std::vector<int> RectGrid::unflat(int flat_index) const {
  std::vector<int> idx(axes.size());
  for (size_t k = 0; k < axes.size(); ++k) {
    idx[k] = flat_index / strides[k];
    flat_index -= idx[k] * strides[k];
  }
  return idx;
}

Vec RectGrid::point(int flat_index) const {
  Vec x(dim());
  for (int k = 0; k < dim(); ++k) {
    int i = flat_index / strides[k];
    flat_index -= i * strides[k];
    x[k] = axes[k].nodes[i];
  }
  return x;
}

int RectGrid::origin_flat() const {
  int f = 0;
  for (size_t k = 0; k < axes.size(); ++k) f += axes[k].origin_index * strides[k];
  return f;
}

int RectGrid::nearest_flat(const Vec& x, double* max_cell_dist) const {
  int f = 0;
  double worst = 0.0;
  for (int k = 0; k < dim(); ++k) {
    const Axis& a = axes[k];
    int i = static_cast<int>(std::lround((x[k] - a.lo) / a.spacing));
    i = std::max(0, std::min(a.n - 1, i));
    f += i * strides[k];
    worst = std::max(worst, std::abs(x[k] - a.nodes[i]) / a.spacing);
  }
  if (max_cell_dist) *max_cell_dist = worst;
  return f;
}

bool RectGrid::contains(const Vec& x) const {
  for (int k = 0; k < dim(); ++k) {
    const Axis& a = axes[k];
    const double eps = kSnapEps * a.spacing;
    if (x[k] < a.lo - eps || x[k] > a.hi + eps) return false;
  }
  return true;
}

double RectGrid::max_cell_diameter() const {
  double s = 0.0;
  for (const Axis& a : axes) s += a.spacing * a.spacing;
  return std::sqrt(s);
}

bool RectGrid::compatible(const RectGrid& other) const {
  if (axes.size() != other.axes.size()) return false;
  for (size_t k = 0; k < axes.size(); ++k) {
    if (axes[k].n != other.axes[k].n || axes[k].lo != other.axes[k].lo ||
        axes[k].hi != other.axes[k].hi) {
      return false;
    }
  }
  return true;
}

namespace {

RectGrid make_grid(const Vec& lo, const Vec& hi, const std::vector<int>& node_counts) {
  if (static_cast<Eigen::Index>(node_counts.size()) != lo.size()) {
    throw ContractViolation("grid node counts must match box dimension");
  }
  if (lo.size() > kMaxDim) throw ContractViolation("grid dimension exceeds supported maximum");
  RectGrid g;
  for (Eigen::Index k = 0; k < lo.size(); ++k) {
    g.axes.push_back(make_axis(lo[k], hi[k], node_counts[k]));
  }
  g.strides.assign(g.axes.size(), 1);
  for (int k = g.dim() - 2; k >= 0; --k) {
    g.strides[k] = g.strides[k + 1] * g.axes[k + 1].n;
  }
  g.total = g.strides[0] * g.axes[0].n;
  return g;
}

}  // namespace

StateGrid make_state_grid(const Vec& lo, const Vec& hi, const std::vector<int>& node_counts) {
  return make_grid(lo, hi, node_counts);
}

ControlGrid make_control_grid(const Vec& lo, const Vec& hi, const std::vector<int>& node_counts) {
  return make_grid(lo, hi, node_counts);
}

ExtendedField make_field(const StateGrid& grid, double fill, std::string label,
                         FieldPolarity polarity) {
  ExtendedField f;
  f.grid = grid;
  f.values.assign(grid.total, fill);
  f.label = std::move(label);
  f.polarity = polarity;
  return f;
}

CellRef locate_cell(const StateGrid& grid, const Vec& x) {
  CellRef c;
  if (!grid.contains(x)) return c;
  int base = 0;
  for (int k = 0; k < grid.dim(); ++k) {
    const Axis& a = grid.axes[k];
    double u = (x[k] - a.lo) / a.spacing;
    int i = static_cast<int>(std::floor(u));
    double t = u - i;
    if (i < 0) {
      i = 0;
      t = 0.0;
    }
    if (i >= a.n - 1) {
      i = a.n - 2;
      t = u - i;
    }
    if (t < kSnapEps) t = 0.0;
    if (t > 1.0 - kSnapEps) t = 1.0;
    base += i * grid.strides[k];
    c.frac[k] = t;
  }
  c.base = base;
  c.inside = true;
  return c;
}

double interpolate_cell(const StateGrid& grid, const std::vector<double>& values,
                        const CellRef& cell) {
  const int d = grid.dim();
  double sum = 0.0;
  bool has_pinf = false, has_ninf = false;
  const int corners = 1 << d;
  for (int m = 0; m < corners; ++m) {
    double w = 1.0;
    int offset = 0;
    for (int k = 0; k < d; ++k) {
      const bool hi = (m >> k) & 1;
      w *= hi ? cell.frac[k] : 1.0 - cell.frac[k];
      if (hi) offset += grid.strides[k];
    }
    if (w == 0.0) continue;
    const double v = values[cell.base + offset];
    if (v == kInf) {
      has_pinf = true;
    } else if (v == -kInf) {
      has_ninf = true;
    } else {
      sum += w * v;
    }
  }
  if (has_pinf && has_ninf) {
    throw DataCorruption("interpolation cell mixes +inf and -inf");
  }
  if (has_pinf) return kInf;
  if (has_ninf) return -kInf;
  return sum;
}

double interpolate(const ExtendedField& field, const Vec& x) {
  if (x.size() != field.grid.dim()) {
    throw ContractViolation("interpolate: point dimension does not match grid");
  }
  CellRef cell = locate_cell(field.grid, x);
  if (!cell.inside) {
    return field.polarity == FieldPolarity::min_type ? kInf : -kInf;
  }
  return interpolate_cell(field.grid, field.values, cell);
}

void inf_convolve_l1_inplace(const RectGrid& g, std::vector<double>& values, double p) {
  if (!(p > 0.0)) throw ContractViolation("inf_convolve_l1 needs p > 0");
  // One forward and one backward relaxation pass per dimension. -inf values
  // propagate like any other lower envelope value.
  for (int k = 0; k < g.dim(); ++k) {
    const int n = g.axes[k].n;
    const int stride = g.strides[k];
    const double step = p * g.axes[k].spacing;
    const int lines = g.total / n;
    for (int line = 0; line < lines; ++line) {
      // Base index of this line: distribute "line" over the other dims.
      int rem = line;
      int base = 0;
      for (int j = 0; j < g.dim(); ++j) {
        if (j == k) continue;
        const int nj = g.axes[j].n;
        base += (rem % nj) * g.strides[j];
        rem /= nj;
      }
      for (int i = 1; i < n; ++i) {
        double relax = values[base + (i - 1) * stride] + step;
        if (relax < values[base + i * stride]) values[base + i * stride] = relax;
      }
      for (int i = n - 2; i >= 0; --i) {
        double relax = values[base + (i + 1) * stride] + step;
        if (relax < values[base + i * stride]) values[base + i * stride] = relax;
      }
    }
  }
}

ExtendedField inf_convolve_l1(const ExtendedField& field, double p) {
  if (field.polarity != FieldPolarity::min_type) {
    throw ContractViolation("inf_convolve_l1 expects a min-type field");
  }
  ExtendedField out = field;
  inf_convolve_l1_inplace(field.grid, out.values, p);
  return out;
}

ExtendedField sup_convolve_l1(const ExtendedField& field, double p) {
  if (field.polarity != FieldPolarity::max_type) {
    throw ContractViolation("sup_convolve_l1 expects a max-type field");
  }
  ExtendedField flipped = negate(field, field.label);
  ExtendedField conv = inf_convolve_l1(flipped, p);
  return negate(conv, field.label);
}

ExtendedField negate(const ExtendedField& field, std::string label) {
  ExtendedField out = field;
  if (!label.empty()) out.label = std::move(label);
  for (double& v : out.values) v = -v;
  out.polarity = field.polarity == FieldPolarity::min_type ? FieldPolarity::max_type
                                                           : FieldPolarity::min_type;
  return out;
}

}  // namespace empc
