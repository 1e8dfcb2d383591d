#include "empc/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace empc {

std::string format_double(double v) {
  if (v == kInf) return "+inf";
  if (v == -kInf) return "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  return std::string(buf, end);
}

namespace {

void write_vec(std::ostream& os, const Vec& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) os << ',';
    os << format_double(v[k]);
  }
}

void coord_header(std::ostream& os, const char* prefix, int dim) {
  for (int k = 0; k < dim; ++k) {
    if (k) os << ',';
    os << prefix << k + 1;
  }
}

}  // namespace

void write_field_csv(std::ostream& os, const ExtendedField& field) {
  coord_header(os, "x", field.grid.dim());
  os << ",value\n";
  for (int i = 0; i < field.grid.total; ++i) {
    write_vec(os, field.grid.point(i));
    os << ',' << format_double(field.values[i]) << '\n';
  }
}

void write_solution_csv(std::ostream& os, const ValueSolution& sol, const ControlGrid& cgrid) {
  coord_header(os, "x", sol.value.grid.dim());
  os << ",value,feasible,";
  coord_header(os, "u", cgrid.dim());
  os << '\n';
  for (int i = 0; i < sol.value.grid.total; ++i) {
    write_vec(os, sol.value.grid.point(i));
    os << ',' << format_double(sol.value.values[i]) << ',' << (sol.masked(i) ? 1 : 0) << ',';
    if (sol.policy[i] >= 0) {
      write_vec(os, cgrid.point(sol.policy[i]));
    } else {
      for (int k = 0; k < cgrid.dim(); ++k) {
        if (k) os << ',';
        os << "";
      }
    }
    os << '\n';
  }
}

void write_residual_history_csv(std::ostream& os, const std::vector<double>& history) {
  os << "sweep,residual\n";
  for (size_t i = 0; i < history.size(); ++i) {
    os << i + 1 << ',' << format_double(history[i]) << '\n';
  }
}

void write_violations_csv(std::ostream& os, const DissipativityReport& report) {
  os << "x,u,rotated,required\n";
  for (const auto& v : report.violations) {
    os << '"';
    write_vec(os, v.x);
    os << "\",\"";
    write_vec(os, v.u);
    os << "\"," << format_double(v.rotated) << ',' << format_double(v.required) << '\n';
  }
}

void write_closed_loop_batch_csv(std::ostream& os, const std::vector<Vec>& starts,
                                 const std::vector<ClosedLoopResult>& results) {
  if (starts.empty()) {
    os << "converged,steps,cost,infeasible_at\n";
    return;
  }
  coord_header(os, "x", static_cast<int>(starts.front().size()));
  os << ",converged,steps,cost,infeasible_at\n";
  for (size_t i = 0; i < starts.size(); ++i) {
    write_vec(os, starts[i]);
    const auto& r = results[i];
    os << ',' << (r.converged ? 1 : 0) << ',' << r.steps << ','
       << format_double(r.accumulated_cost) << ',';
    if (r.infeasible_at) os << *r.infeasible_at;
    os << '\n';
  }
}

nlohmann::json field_summary_json(const ExtendedField& field) {
  double lo = kInf, hi = -kInf;
  int argmin = -1;
  long finite = 0;
  for (int i = 0; i < field.grid.total; ++i) {
    const double v = field.values[i];
    if (!std::isfinite(v)) continue;
    finite += 1;
    if (v < lo) {
      lo = v;
      argmin = i;
    }
    hi = std::max(hi, v);
  }
  nlohmann::json j;
  j["label"] = field.label;
  j["nodes"] = field.grid.total;
  j["finite_nodes"] = finite;
  j["min"] = format_double(lo);
  j["max"] = format_double(hi);
  if (argmin >= 0) {
    const Vec x = field.grid.point(argmin);
    j["argmin"] = std::vector<double>(x.data(), x.data() + x.size());
  }
  return j;
}

nlohmann::json report_json(const DissipativityReport& report) {
  nlohmann::json j;
  j["pass"] = report.pass;
  j["min_margin"] = format_double(report.min_margin);
  j["violation_count"] = report.violation_count;
  j["pairs_checked"] = report.pairs_checked;
  j["fitted_coefficient"] = report.fitted_coefficient;
  j["tolerance"] = report.tol;
  if (report.argmin_x.size() > 0) {
    j["argmin_x"] = std::vector<double>(report.argmin_x.data(),
                                        report.argmin_x.data() + report.argmin_x.size());
  }
  if (report.argmin_u.size() > 0) {
    j["argmin_u"] = std::vector<double>(report.argmin_u.data(),
                                        report.argmin_u.data() + report.argmin_u.size());
  }
  return j;
}

uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex64(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace empc
