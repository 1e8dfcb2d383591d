#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "empc/grid.hpp"
#include "empc/io.hpp"

using namespace empc;

namespace {

StateGrid grid1d(double lo, double hi, int n) {
  return make_state_grid(scalar_vec(lo), scalar_vec(hi), {n});
}

// Independent O(n^2) oracle: min over nodes y of v(y) + p * ||x - y||_1 with
// distances counted in index steps times the spacing.
std::vector<double> brute_force_inf_conv(const RectGrid& g, const std::vector<double>& v,
                                         double p) {
  std::vector<double> out(v.size(), kInf);
  for (int i = 0; i < g.total; ++i) {
    const auto idx_i = g.unflat(i);
    for (int j = 0; j < g.total; ++j) {
      if (!std::isfinite(v[j]) && v[j] > 0) continue;
      const auto idx_j = g.unflat(j);
      double dist = 0.0;
      for (int k = 0; k < g.dim(); ++k) {
        dist += std::abs(idx_i[k] - idx_j[k]) * (p * g.axes[k].spacing);
      }
      out[i] = std::min(out[i], v[j] + dist);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("axis construction enforces the invariants") {
  CHECK_THROWS_AS(make_axis(-1.0, 1.0, 2), ContractViolation);   // too few nodes
  CHECK_THROWS_AS(make_axis(-1.0, 1.0, 4), ContractViolation);   // origin off-grid
  CHECK_THROWS_AS(make_axis(0.5, 1.5, 3), ContractViolation);    // origin outside
  Axis a = make_axis(-10.0, 10.0, 401);
  CHECK(a.spacing == doctest::Approx(0.05));
  CHECK(a.nodes[a.origin_index] == 0.0);
  CHECK(a.nodes.front() == -10.0);
  CHECK(a.nodes.back() == 10.0);
}

TEST_CASE("interpolation basics") {
  StateGrid g = grid1d(-1.0, 1.0, 3);
  ExtendedField f = make_field(g, 0.0, "f");
  f.values = {0.0, 0.0, 2.0};
  CHECK(interpolate(f, scalar_vec(0.5)) == doctest::Approx(1.0));
  CHECK(interpolate(f, scalar_vec(1.0)) == 2.0);   // node value exactly
  CHECK(interpolate(f, scalar_vec(-1.0)) == 0.0);

  f.values = {0.0, 0.0, kInf};
  CHECK(interpolate(f, scalar_vec(0.5)) == kInf);  // infinity poisons the cell
  CHECK(interpolate(f, scalar_vec(0.0)) == 0.0);   // zero-weight vertex ignored

  CHECK(interpolate(f, scalar_vec(2.0)) == kInf);  // outside, min-type
  f.polarity = FieldPolarity::max_type;
  CHECK(interpolate(f, scalar_vec(2.0)) == -kInf);
}

TEST_CASE("mixed infinities in one cell are data corruption") {
  StateGrid g = grid1d(-1.0, 1.0, 3);
  ExtendedField f = make_field(g, 0.0, "f");
  f.values = {0.0, kInf, -kInf};
  CHECK_THROWS_AS(interpolate(f, scalar_vec(0.5)), DataCorruption);
}

TEST_CASE("interpolation is monotone in the vertex values") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> val(-5.0, 5.0), pos(-1.0, 1.0);
  StateGrid g = make_state_grid(make_vec({-1.0, -1.0}), make_vec({1.0, 1.0}), {5, 5});
  for (int trial = 0; trial < 50; ++trial) {
    ExtendedField f = make_field(g, 0.0, "f");
    for (double& v : f.values) v = val(rng);
    ExtendedField raised = f;
    const int k = static_cast<int>(rng() % raised.values.size());
    raised.values[k] += 1.0;
    for (int q = 0; q < 20; ++q) {
      const Vec x = make_vec({pos(rng), pos(rng)});
      CHECK(interpolate(raised, x) >= interpolate(f, x) - 1e-12);
    }
  }
}

TEST_CASE("inf-convolution worked examples") {
  StateGrid g = grid1d(-1.0, 1.0, 3);
  ExtendedField f = make_field(g, kInf, "f");
  f.values = {kInf, 0.0, kInf};
  ExtendedField c = inf_convolve_l1(f, 2.0);
  CHECK(c.values[0] == doctest::Approx(2.0));
  CHECK(c.values[1] == 0.0);
  CHECK(c.values[2] == doctest::Approx(2.0));

  ExtendedField zeros = make_field(g, 0.0, "z");
  ExtendedField cz = inf_convolve_l1(zeros, 3.0);
  for (double v : cz.values) CHECK(v == 0.0);

  f.values = {4.0, 0.0, 4.0};
  c = inf_convolve_l1(f, 1.0);
  CHECK(c.values[0] == doctest::Approx(1.0));
  CHECK(c.values[1] == 0.0);
  CHECK(c.values[2] == doctest::Approx(1.0));
}

TEST_CASE("inf-convolution equals the brute-force oracle exactly") {
  // Integer-valued fields with integer p*spacing keep every intermediate
  // representable, so the sweep and the oracle must agree bit for bit.
  std::mt19937 rng(123);
  std::uniform_int_distribution<int> val(0, 100);
  std::uniform_int_distribution<int> n1(3, 15), n2(3, 15), pk(1, 4);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const bool two_d = trial % 2 == 1;
    std::vector<int> counts = two_d ? std::vector<int>{n1(rng), n2(rng)}
                                    : std::vector<int>{n1(rng)};
    Vec lo(two_d ? 2 : 1), hi(two_d ? 2 : 1);
    for (Eigen::Index k = 0; k < lo.size(); ++k) {
      lo[k] = -(counts[k] / 2);
      hi[k] = counts[k] - 1 - counts[k] / 2;  // unit spacing, origin on a node
    }
    StateGrid g = make_state_grid(lo, hi, counts);
    ExtendedField f = make_field(g, 0.0, "f");
    for (double& v : f.values) {
      v = coin(rng) < 0.2 ? kInf : static_cast<double>(val(rng));
    }
    const double p = static_cast<double>(pk(rng));
    ExtendedField swept = inf_convolve_l1(f, p);
    std::vector<double> oracle = brute_force_inf_conv(g, f.values, p);
    for (int i = 0; i < g.total; ++i) CHECK(swept.values[i] == oracle[i]);

    // Envelope properties on the same field.
    ExtendedField twice = inf_convolve_l1(swept, p);
    for (int i = 0; i < g.total; ++i) {
      CHECK(twice.values[i] == swept.values[i]);   // idempotent
      CHECK(swept.values[i] <= f.values[i]);       // never above the input
    }
  }
}

TEST_CASE("sup-convolution duality") {
  StateGrid g = grid1d(-1.0, 1.0, 3);
  ExtendedField f = make_field(g, -kInf, "f", FieldPolarity::max_type);
  f.values = {-kInf, 0.0, -kInf};
  ExtendedField c = sup_convolve_l1(f, 2.0);
  CHECK(c.values[0] == doctest::Approx(-2.0));
  CHECK(c.values[1] == 0.0);
  CHECK(c.values[2] == doctest::Approx(-2.0));

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  ExtendedField r = make_field(g, 0.0, "r", FieldPolarity::max_type);
  for (double& v : r.values) v = val(rng);
  ExtendedField lhs = sup_convolve_l1(r, 1.5);
  ExtendedField rhs = negate(inf_convolve_l1(negate(r), 1.5));
  for (int i = 0; i < g.total; ++i) {
    CHECK(lhs.values[i] == rhs.values[i]);
    CHECK(lhs.values[i] >= r.values[i]);  // never below the input
  }
}

TEST_CASE("field CSV and summary formats") {
  StateGrid g = grid1d(-1.0, 1.0, 3);
  ExtendedField f = make_field(g, 0.0, "f");
  f.values = {kInf, 0.5, -kInf};
  f.polarity = FieldPolarity::max_type;
  std::ostringstream os;
  write_field_csv(os, f);
  const std::string csv = os.str();
  CHECK(csv.find("x1,value") == 0);
  CHECK(csv.find("+inf") != std::string::npos);
  CHECK(csv.find("-inf") != std::string::npos);

  auto j = field_summary_json(f);
  CHECK(j["finite_nodes"] == 1);
  CHECK(j["min"] == "0.5");
}
