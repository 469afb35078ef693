#pragma once

#include <iosfwd>
#include <vector>

#include "atesmpc/sim.hpp"

namespace atesmpc {

/// One row per agent-step; every number in shortest round-trip form.
void write_trace_csv(std::ostream& os, const SimulationTrace& trace);
/// One row per agent, step and block of the committed plans.
void write_plans_csv(std::ostream& os, const SimulationTrace& trace);

/// Rebuilds a trace from the two CSV files. Throws std::invalid_argument on
/// malformed input or a mismatch with the expected agents and schedule.
SimulationTrace read_trace_csv(std::istream& trace_csv, std::istream& plans_csv, Mode mode, int agents,
                               const BlockingSchedule& schedule);

/// mode,step,agent,x_h,x_c rows for every trace.
void write_imbalance_series(std::ostream& os, const std::vector<const SimulationTrace*>& traces);
/// mode,step,i,j,margin rows with d_ij - r_h,i - r_c,j for every neighbor pair.
void write_radius_series(std::ostream& os, const SimulationConfig& cfg,
                         const std::vector<const SimulationTrace*>& traces);

} // namespace atesmpc
