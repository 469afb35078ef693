#include "atesmpc/trace_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "atesmpc/format.hpp"

namespace atesmpc {

namespace {

const char* const kTraceHeader =
    "step,agent,x_h,x_c,v_h,v_c,s_h,s_c,"
    "h_b,h_im,c_ch,c_im,u_a_h,u_a_c,c_su_b,c_su_ch,e,v_b,v_ch,m_a,"
    "forecast_h,forecast_c,demand_h,demand_c,"
    "next_x_h,next_x_c,next_v_h,next_v_c,next_s_h,next_s_c,"
    "stage_cost,status,objective,gap,nodes,fallback,volume_margin,radius_margin,balance_gap";

const char* const kPlansHeader = "step,agent,block,start,h_b,h_im,c_ch,c_im,u_a_h,u_a_c,c_su_b,c_su_ch,e";

constexpr int kTraceColumns = 39;

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

void put_state(std::ostream& os, const AgentState& x)
{
    for (double v : {x.x_h, x.x_c, x.v_h, x.v_c, x.s_h, x.s_c})
        os << ',' << format_double(v);
}

AgentState get_state(const std::vector<std::string>& c, int at)
{
    AgentState x;
    x.x_h = parse_double(c[at]);
    x.x_c = parse_double(c[at + 1]);
    x.v_h = parse_double(c[at + 2]);
    x.v_c = parse_double(c[at + 3]);
    x.s_h = parse_double(c[at + 4]);
    x.s_c = parse_double(c[at + 5]);
    return x;
}

MiqpStatus parse_status(const std::string& s)
{
    for (MiqpStatus st : {MiqpStatus::Optimal, MiqpStatus::Infeasible, MiqpStatus::GapLimit,
                          MiqpStatus::NodeLimit, MiqpStatus::TimeLimit})
        if (s == status_name(st))
            return st;
    throw std::invalid_argument("unknown solver status '" + s + "'");
}

[[noreturn]] void bad_line(const char* file, int line, const std::string& why)
{
    std::ostringstream os;
    os << file << " line " << line << ": " << why;
    throw std::invalid_argument(os.str());
}

} // namespace

void write_trace_csv(std::ostream& os, const SimulationTrace& trace)
{
    os << kTraceHeader << '\n';
    for (const StepRecord& r : trace.records) {
        os << r.step << ',' << r.agent;
        put_state(os, r.state);
        const AgentInput& u = r.input;
        for (double v : {u.h_b, u.h_im, u.c_ch, u.c_im, u.u_a_h, u.u_a_c, u.c_su_b, u.c_su_ch, u.e, u.v_b,
                         u.v_ch, u.m_a})
            os << ',' << format_double(v);
        for (double v : {r.forecast.heating, r.forecast.cooling, r.realized.heating, r.realized.cooling})
            os << ',' << format_double(v);
        put_state(os, r.next);
        os << ',' << format_double(r.stage_cost) << ',' << status_name(r.status) << ','
           << format_double(r.objective) << ',' << format_double(r.gap) << ',' << r.nodes << ','
           << (r.fallback ? 1 : 0) << ',' << format_double(r.volume_margin) << ','
           << format_double(r.radius_margin) << ',' << format_double(r.balance_gap) << '\n';
    }
}

void write_plans_csv(std::ostream& os, const SimulationTrace& trace)
{
    os << kPlansHeader << '\n';
    for (const StepPlan& p : trace.plans)
        for (std::size_t a = 0; a < p.inputs.size(); ++a)
            for (int b = 0; b < p.inputs[a].rows(); ++b) {
                os << p.step << ',' << a << ',' << b << ',' << trace.schedule.update_steps[b];
                for (int k = 0; k < kInputDim; ++k)
                    os << ',' << format_double(p.inputs[a](b, k));
                os << '\n';
            }
}

SimulationTrace read_trace_csv(std::istream& trace_csv, std::istream& plans_csv, Mode mode, int agents,
                               const BlockingSchedule& schedule)
{
    SimulationTrace tr;
    tr.mode = mode;
    tr.agents = agents;
    tr.schedule = schedule;

    std::string line;
    if (!std::getline(trace_csv, line) || line != kTraceHeader)
        throw std::invalid_argument("trace: unexpected header");
    int ln = 1;
    while (std::getline(trace_csv, line)) {
        ++ln;
        if (line.empty())
            continue;
        const auto c = split(line);
        if (static_cast<int>(c.size()) != kTraceColumns)
            bad_line("trace", ln, "expected 39 columns");
        try {
            StepRecord r;
            r.step = std::stoi(c[0]);
            r.agent = std::stoi(c[1]);
            const int expect = static_cast<int>(tr.records.size());
            if (r.step != expect / agents || r.agent != expect % agents)
                bad_line("trace", ln, "records out of order");
            r.state = get_state(c, 2);
            Eigen::VectorXd u(12);
            for (int k = 0; k < 12; ++k)
                u(k) = parse_double(c[8 + k]);
            r.input = AgentInput::from_continuous(u.head(kInputDim));
            r.input.v_b = u(9);
            r.input.v_ch = u(10);
            r.input.m_a = u(11);
            r.forecast = {parse_double(c[20]), parse_double(c[21])};
            r.realized = {parse_double(c[22]), parse_double(c[23])};
            r.next = get_state(c, 24);
            r.stage_cost = parse_double(c[30]);
            r.status = parse_status(c[31]);
            r.objective = parse_double(c[32]);
            r.gap = parse_double(c[33]);
            r.nodes = std::stol(c[34]);
            r.fallback = c[35] == "1";
            r.volume_margin = parse_double(c[36]);
            r.radius_margin = parse_double(c[37]);
            r.balance_gap = parse_double(c[38]);
            tr.records.push_back(r);
        } catch (const std::invalid_argument& e) {
            if (std::string(e.what()).rfind("trace line", 0) == 0)
                throw;
            bad_line("trace", ln, e.what());
        }
    }
    if (tr.records.size() % static_cast<std::size_t>(agents) != 0)
        throw std::invalid_argument("trace: incomplete final step");

    if (!std::getline(plans_csv, line) || line != kPlansHeader)
        throw std::invalid_argument("plans: unexpected header");
    const int steps = tr.steps();
    tr.plans.resize(steps);
    for (int t = 0; t < steps; ++t) {
        tr.plans[t].step = t;
        tr.plans[t].inputs.assign(agents, Eigen::MatrixXd::Zero(schedule.blocks(), kInputDim));
    }
    const long expected = static_cast<long>(steps) * agents * schedule.blocks();
    long rows = 0;
    ln = 1;
    while (std::getline(plans_csv, line)) {
        ++ln;
        if (line.empty())
            continue;
        const auto c = split(line);
        if (c.size() != 4 + kInputDim)
            bad_line("plans", ln, "expected 13 columns");
        const long pos = rows++;
        const int t = std::stoi(c[0]), a = std::stoi(c[1]), b = std::stoi(c[2]);
        if (pos >= expected || t != pos / (agents * schedule.blocks()) ||
            a != (pos / schedule.blocks()) % agents || b != pos % schedule.blocks())
            bad_line("plans", ln, "rows do not match the trace and schedule");
        if (std::stoi(c[3]) != schedule.update_steps[b])
            bad_line("plans", ln, "block start does not match the schedule");
        for (int k = 0; k < kInputDim; ++k)
            tr.plans[t].inputs[a](b, k) = parse_double(c[4 + k]);
    }
    if (rows != expected)
        throw std::invalid_argument("plans: row count does not match the trace");
    return tr;
}

void write_imbalance_series(std::ostream& os, const std::vector<const SimulationTrace*>& traces)
{
    os << "mode,step,agent,x_h,x_c\n";
    for (const SimulationTrace* t : traces)
        for (const StepRecord& r : t->records)
            os << mode_name(t->mode) << ',' << r.step << ',' << r.agent << ',' << format_double(r.next.x_h)
               << ',' << format_double(r.next.x_c) << '\n';
}

void write_radius_series(std::ostream& os, const SimulationConfig& cfg,
                         const std::vector<const SimulationTrace*>& traces)
{
    os << "mode,step,i,j,margin\n";
    for (const SimulationTrace* tr : traces)
        for (int t = 0; t < tr->steps(); ++t)
            for (int i = 0; i < tr->agents; ++i)
                for (const auto& nb : cfg.agents[i].params.neighbors) {
                    const double rh = thermal_radius(tr->at(t, i).next.v_h, cfg.agents[i].params.aquifer);
                    const double rc =
                        thermal_radius(tr->at(t, nb.agent).next.v_c, cfg.agents[nb.agent].params.aquifer);
                    os << mode_name(tr->mode) << ',' << t << ',' << i << ',' << nb.agent << ','
                       << format_double(nb.distance - rh - rc) << '\n';
                }
}

} // namespace atesmpc
