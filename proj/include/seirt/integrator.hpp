#pragma once

#include "seirt/errors.hpp"
#include "seirt/model.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <sstream>
#include <vector>

namespace seirt {

inline constexpr double kDefaultStep = 0.05;

template <std::size_t Dim>
using StateVector = std::array<double, Dim>;

namespace detail {

template <std::size_t Dim>
inline void check_finite(const StateVector<Dim>& k, double t) {
    for (std::size_t c = 0; c < Dim; ++c) {
        if (!std::isfinite(k[c])) {
            std::ostringstream os;
            os << "non-finite derivative at t=" << t << " in component " << c;
            throw IntegrationError(t, c, os.str());
        }
    }
}

}  // namespace detail

/// Number of RK4 substeps used to cross an interval of length `span` with a
/// requested step; substeps always land exactly on the interval end.
inline int substeps_for(double span, double step) {
    const int n = static_cast<int>(std::ceil(span / step - 1e-9));
    return n < 1 ? 1 : n;
}

/**
 * Classical RK4 on a fixed-size state. The last stage of each substep is
 * evaluated at the left limit of the substep end, so coefficient schedules and
 * daily testing rates switch exactly at substep boundaries.
 */
template <std::size_t Dim, class Rhs>
StateVector<Dim> rk4_step(const Rhs& rhs, double t, const StateVector<Dim>& x, double h) {
    StateVector<Dim> tmp;
    const StateVector<Dim> k1 = rhs(t, x);
    detail::check_finite(k1, t);
    for (std::size_t c = 0; c < Dim; ++c) tmp[c] = x[c] + 0.5 * h * k1[c];
    const StateVector<Dim> k2 = rhs(t + 0.5 * h, tmp);
    detail::check_finite(k2, t + 0.5 * h);
    for (std::size_t c = 0; c < Dim; ++c) tmp[c] = x[c] + 0.5 * h * k2[c];
    const StateVector<Dim> k3 = rhs(t + 0.5 * h, tmp);
    detail::check_finite(k3, t + 0.5 * h);
    for (std::size_t c = 0; c < Dim; ++c) tmp[c] = x[c] + h * k3[c];
    const double t_end = std::nextafter(t + h, t);
    const StateVector<Dim> k4 = rhs(t_end, tmp);
    detail::check_finite(k4, t_end);
    StateVector<Dim> out;
    for (std::size_t c = 0; c < Dim; ++c) out[c] = x[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    return out;
}

/**
 * March from t0 to t1 and report the state at t0, at every integer day in
 * (t0, t1) and at t1. `repair` runs after every substep. `on_sample(t, x)`
 * may return false to stop early.
 */
template <std::size_t Dim, class Rhs, class Repair, class OnSample>
StateVector<Dim> march(const Rhs& rhs, StateVector<Dim> x, double t0, double t1, double step, Repair&& repair,
                       OnSample&& on_sample) {
    if (!(t1 > t0)) throw DomainError("integrate: t1 must exceed t0");
    if (!(step > 0.0)) throw DomainError("integrate: step must be positive");
    if (!on_sample(t0, x)) return x;
    double a = t0;
    while (a < t1) {
        double b = std::floor(a) + 1.0;
        if (b > t1) b = t1;
        const int n = substeps_for(b - a, step);
        const double h = (b - a) / n;
        for (int i = 0; i < n; ++i) {
            const double t = a + i * h;
            x = rk4_step<Dim>(rhs, t, x, i + 1 == n ? b - t : h);
            repair(x);
        }
        a = b;
        if (!on_sample(a, x)) break;
    }
    return x;
}

struct TrajectorySample {
    double t = 0.0;
    CompartmentState state;
};

/// Daily-sampled solution of one of the compartment systems.
struct Trajectory {
    double t0 = 0.0;
    double step = kDefaultStep;
    std::vector<TrajectorySample> samples;

    const CompartmentState& final_state() const { return samples.back().state; }
    /// Sample at day t (exact match); throws DomainError when absent.
    const CompartmentState& at(double t) const;
};

using CompartmentRhs = std::function<CompartmentState(double, const CompartmentState&)>;

/// Clamp roundoff negatives to zero, moving the deficit into L so that the
/// population total is unchanged.
void repair_compartments(StateVector<CompartmentState::size>& x);

Trajectory integrate(const CompartmentRhs& rhs, const CompartmentState& state0, double t0, double t1,
                     double step = kDefaultStep);

/// Integrate the testing system with fixed parameters and policy; the hot path
/// used by estimation and planning (no type erasure).
Trajectory simulate_seir4(const ModelParams& params, const TestingPolicy& policy, const CompartmentState& state0,
                          double t0, double t1, double step = kDefaultStep);

/// Only the state at t1.
CompartmentState advance_seir4(const ModelParams& params, const TestingPolicy& policy, const CompartmentState& state0,
                               double t0, double t1, double step = kDefaultStep);

struct Seir5Run {
    Seir5State final_state;
    double t_end = 0.0;
};

/// Long-run horizon for final-size runs: up to `max_days` or until I < 0.5.
Seir5Run integrate_seir5_long_run(const ConstantParams& p, const Seir5State& state0, double max_days = 400.0,
                                  double step = kDefaultStep);

/// CSV columns t,S,E,I,T,F1,R1,L,D with D = rho(t) I + T.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const DecaySchedule& rho);

}  // namespace seirt
