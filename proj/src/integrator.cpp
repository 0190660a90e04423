#include "seirt/integrator.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

namespace seirt {

namespace {

using Vec7 = StateVector<CompartmentState::size>;
using Vec5 = StateVector<Seir5State::size>;

constexpr std::size_t kL = 6;
constexpr std::size_t kT = 3;

void append_number(std::string& out, double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

}  // namespace

const CompartmentState& Trajectory::at(double t) const {
    for (const auto& s : samples) {
        if (s.t == t) return s.state;
    }
    std::ostringstream os;
    os << "Trajectory: no sample at t=" << t;
    throw DomainError(os.str());
}

void repair_compartments(Vec7& x) {
    for (std::size_t c = 0; c < x.size(); ++c) {
        if (c == kL || c == kT) continue;
        if (x[c] < 0.0) {
            x[kL] += x[c];
            x[c] = 0.0;
        }
    }
    if (x[kT] < 0.0) x[kT] = 0.0;
    if (x[kL] < 0.0) x[kL] = 0.0;
}

Trajectory integrate(const CompartmentRhs& rhs, const CompartmentState& state0, double t0, double t1, double step) {
    Trajectory traj;
    traj.t0 = t0;
    traj.step = step;
    auto vrhs = [&](double t, const Vec7& x) { return rhs(t, CompartmentState::from_array(x)).to_array(); };
    march<CompartmentState::size>(vrhs, state0.to_array(), t0, t1, step, repair_compartments,
                                  [&](double t, const Vec7& x) {
                                      traj.samples.push_back({t, CompartmentState::from_array(x)});
                                      return true;
                                  });
    return traj;
}

Trajectory simulate_seir4(const ModelParams& params, const TestingPolicy& policy, const CompartmentState& state0,
                          double t0, double t1, double step) {
    Trajectory traj;
    traj.t0 = t0;
    traj.step = step;
    auto vrhs = [&](double t, const Vec7& x) {
        return rhs_seir4(CompartmentState::from_array(x), params, policy, t).to_array();
    };
    march<CompartmentState::size>(vrhs, state0.to_array(), t0, t1, step, repair_compartments,
                                  [&](double t, const Vec7& x) {
                                      traj.samples.push_back({t, CompartmentState::from_array(x)});
                                      return true;
                                  });
    return traj;
}

CompartmentState advance_seir4(const ModelParams& params, const TestingPolicy& policy, const CompartmentState& state0,
                               double t0, double t1, double step) {
    if (t1 == t0) return state0;
    auto vrhs = [&](double t, const Vec7& x) {
        return rhs_seir4(CompartmentState::from_array(x), params, policy, t).to_array();
    };
    const Vec7 end = march<CompartmentState::size>(vrhs, state0.to_array(), t0, t1, step, repair_compartments,
                                                   [](double, const Vec7&) { return true; });
    return CompartmentState::from_array(end);
}

Seir5Run integrate_seir5_long_run(const ConstantParams& p, const Seir5State& state0, double max_days, double step) {
    auto vrhs = [&](double, const Vec5& x) { return rhs_seir5(Seir5State::from_array(x), p).to_array(); };
    Seir5Run run;
    run.t_end = 0.0;
    const Vec5 end = march<Seir5State::size>(vrhs, state0.to_array(), 0.0, max_days, step, [](Vec5&) {},
                                             [&](double t, const Vec5& x) {
                                                 run.t_end = t;
                                                 return t == 0.0 || x[2] >= 0.5;
                                             });
    run.final_state = Seir5State::from_array(end);
    return run;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const DecaySchedule& rho) {
    os << "t,S,E,I,T,F1,R1,L,D\n";
    std::string line;
    for (const auto& s : traj.samples) {
        line.clear();
        const auto& x = s.state;
        const double values[] = {s.t, x.S, x.E, x.I, x.T, x.F1, x.R1, x.L, x.detected(rho(s.t))};
        for (std::size_t k = 0; k < std::size(values); ++k) {
            if (k) line.push_back(',');
            append_number(line, values[k]);
        }
        line.push_back('\n');
        os << line;
    }
}

}  // namespace seirt
