#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace seirt {

/**
 * One continuity interval of a time-varying coefficient:
 *
 *   value(t) = c0 - c1 * (1 - exp(-r * (t - t_start)))
 *
 * The value starts at c0 and relaxes towards c0 - c1 at rate r. A negative
 * c1 gives an increasing coefficient.
 */
struct DecaySegment {
    double c0 = 0.0;
    double c1 = 0.0;
    double r = 0.0;
    double t_start = 0.0;
    double t_end = std::numeric_limits<double>::infinity();  // exclusive

    double value(double t) const { return c0 + c1 * std::expm1(-r * (t - t_start)); }

    /// Smallest and largest value over [t_start, t_end) (limit value for open segments).
    double lower_envelope() const;
    double upper_envelope() const;
};

/**
 * Piecewise coefficient made of contiguous DecaySegments. Right-continuous at
 * breakpoints; the final segment extends to +infinity.
 */
class DecaySchedule {
public:
    DecaySchedule() = default;
    explicit DecaySchedule(std::vector<DecaySegment> segments);

    static DecaySchedule constant(double value, double t_start = 0.0);

    /// Throws DomainError for t before the first segment.
    double operator()(double t) const;

    const std::vector<DecaySegment>& segments() const noexcept { return segments_; }
    double start() const { return segments_.front().t_start; }
    bool empty() const noexcept { return segments_.empty(); }

    double lower_envelope() const;
    double upper_envelope() const;

private:
    std::vector<DecaySegment> segments_;
};

double eval_schedule(const DecaySchedule& schedule, double t);

/// Parameters of the time-varying model with equal death/recovery rates for
/// detected and undetected infected individuals.
struct ModelParams {
    DecaySchedule beta;
    DecaySchedule gamma1;  // death rate
    DecaySchedule gamma2;  // recovery rate
    DecaySchedule rho;     // detection rate by tracing, in (0, 1)
    double sigma = 0.2;
    double population = 0.0;

    /// Throws DomainError when an invariant does not hold.
    void validate() const;
};

struct CompartmentState {
    double S = 0.0;
    double E = 0.0;
    double I = 0.0;
    double T = 0.0;  // subcount of I detected by testing
    double F1 = 0.0;
    double R1 = 0.0;
    double L = 0.0;

    static constexpr std::size_t size = 7;

    std::array<double, size> to_array() const { return {S, E, I, T, F1, R1, L}; }
    static CompartmentState from_array(const std::array<double, size>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
    }

    /// S + E + I + F1 + R1 + L (T is part of I).
    double total() const { return S + E + I + F1 + R1 + L; }
    /// Currently detected infected, rho * I + T.
    double detected(double rho) const { return rho * I + T; }
    /// Undetected infectious pool (1 - rho) * I - T.
    double undetected(double rho) const { return (1.0 - rho) * I - T; }
};

/// Tests per day for one location, piecewise constant over each day.
struct TestingPolicy {
    std::map<long, double> alpha_per_day;
    double default_alpha = 0.0;  // days absent from the map
    double factor = 1.0;

    double alpha_at(double t) const;
    void validate(double population) const;

    static TestingPolicy constant(double alpha, double factor = 1.0) {
        TestingPolicy p;
        p.default_alpha = alpha;
        p.factor = factor;
        return p;
    }
};

/// Detections by random testing, alpha * ((1 - rho) I - T) / N, never negative.
double delta_detections(const CompartmentState& state, double alpha_t, const ModelParams& params, double t);

/// Tracing-only system (no mass testing); T is left untouched.
CompartmentState rhs_seir2(const CompartmentState& state, const ModelParams& params, double t);

/// Tracing plus mass testing with detections scaled by policy.factor.
CompartmentState rhs_seir4(const CompartmentState& state, const ModelParams& params, const TestingPolicy& policy,
                           double t);

/// Constant-coefficient aggregate, gamma = gamma1 + gamma2.
struct ConstantParams {
    double beta = 0.0;
    double gamma = 0.0;
    double sigma = 0.0;
    double rho = 0.0;
    double alpha = 0.0;  // tests per day
    double N = 0.0;

    void validate() const;
};

struct Seir5State {
    double S = 0.0;
    double E = 0.0;
    double I = 0.0;
    double T = 0.0;
    double R = 0.0;

    static constexpr std::size_t size = 5;

    std::array<double, size> to_array() const { return {S, E, I, T, R}; }
    static Seir5State from_array(const std::array<double, size>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }
    double total() const { return S + E + I + R; }
};

Seir5State rhs_seir5(const Seir5State& state, const ConstantParams& p);

/// Snapshot of the time-varying coefficients at t, aggregated into constant form.
ConstantParams constant_snapshot(const ModelParams& params, double t, double alpha = 0.0);

}  // namespace seirt
