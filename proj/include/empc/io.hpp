#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "empc/dissipativity.hpp"
#include "empc/dp.hpp"
#include "empc/mpc.hpp"

namespace empc {

// Deterministic shortest-roundtrip formatting; infinities as "+inf"/"-inf".
std::string format_double(double v);

void write_field_csv(std::ostream& os, const ExtendedField& field);
void write_solution_csv(std::ostream& os, const ValueSolution& sol, const ControlGrid& cgrid);
void write_residual_history_csv(std::ostream& os, const std::vector<double>& history);
void write_violations_csv(std::ostream& os, const DissipativityReport& report);
void write_closed_loop_batch_csv(std::ostream& os, const std::vector<Vec>& starts,
                                 const std::vector<ClosedLoopResult>& results);

nlohmann::json field_summary_json(const ExtendedField& field);
nlohmann::json report_json(const DissipativityReport& report);

uint64_t fnv1a64(std::string_view data);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t value);

}  // namespace empc
