#include "seirt/model.hpp"

#include "seirt/errors.hpp"

#include <algorithm>
#include <sstream>

namespace seirt {

namespace {

// Values below this are treated as roundoff when checking nonnegativity.
constexpr double kEnvelopeSlack = 1e-12;

}  // namespace

double DecaySegment::lower_envelope() const {
    const double end = std::isfinite(t_end) ? value(t_end) : (r > 0.0 ? c0 - c1 : c0);
    return std::min(c0, end);
}

double DecaySegment::upper_envelope() const {
    const double end = std::isfinite(t_end) ? value(t_end) : (r > 0.0 ? c0 - c1 : c0);
    return std::max(c0, end);
}

DecaySchedule::DecaySchedule(std::vector<DecaySegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) {
        throw DomainError("DecaySchedule: at least one segment is required");
    }
    for (std::size_t k = 0; k < segments_.size(); ++k) {
        auto& seg = segments_[k];
        if (!(seg.r >= 0.0) || !(seg.c0 >= 0.0)) {
            std::ostringstream os;
            os << "DecaySchedule: segment " << k << " needs r >= 0 and c0 >= 0";
            throw DomainError(os.str());
        }
        if (k + 1 < segments_.size()) {
            if (seg.t_end != segments_[k + 1].t_start) {
                std::ostringstream os;
                os << "DecaySchedule: segment " << k << " ends at " << seg.t_end << " but segment " << k + 1
                   << " starts at " << segments_[k + 1].t_start;
                throw DomainError(os.str());
            }
        } else {
            seg.t_end = std::numeric_limits<double>::infinity();
        }
        if (!(seg.t_end > seg.t_start)) {
            throw DomainError("DecaySchedule: empty segment");
        }
        if (seg.lower_envelope() < -kEnvelopeSlack) {
            std::ostringstream os;
            os << "DecaySchedule: segment " << k << " becomes negative";
            throw DomainError(os.str());
        }
    }
}

DecaySchedule DecaySchedule::constant(double value, double t_start) {
    return DecaySchedule({DecaySegment{value, 0.0, 0.0, t_start}});
}

double DecaySchedule::operator()(double t) const {
    if (segments_.empty() || t < segments_.front().t_start) {
        std::ostringstream os;
        os << "DecaySchedule: t=" << t << " precedes the first segment";
        throw DomainError(os.str());
    }
    // Segments are few (one per week at most); a linear scan from the back
    // beats binary search for the usual case of t in the last segment.
    for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
        if (t >= it->t_start) {
            return it->value(t);
        }
    }
    return segments_.front().value(t);
}

double DecaySchedule::lower_envelope() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& s : segments_) v = std::min(v, s.lower_envelope());
    return v;
}

double DecaySchedule::upper_envelope() const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& s : segments_) v = std::max(v, s.upper_envelope());
    return v;
}

double eval_schedule(const DecaySchedule& schedule, double t) { return schedule(t); }

void ModelParams::validate() const {
    if (!(sigma > 0.0)) throw DomainError("ModelParams: sigma must be positive");
    if (!(population > 0.0)) throw DomainError("ModelParams: population must be positive");
    if (beta.empty() || gamma1.empty() || gamma2.empty() || rho.empty()) {
        throw DomainError("ModelParams: every schedule needs at least one segment");
    }
    if (!(rho.lower_envelope() > 0.0) || !(rho.upper_envelope() < 1.0)) {
        throw DomainError("ModelParams: rho must stay inside (0, 1)");
    }
}

double TestingPolicy::alpha_at(double t) const {
    if (alpha_per_day.empty()) return default_alpha;
    const auto it = alpha_per_day.find(static_cast<long>(std::floor(t)));
    return it == alpha_per_day.end() ? default_alpha : it->second;
}

void TestingPolicy::validate(double population) const {
    if (!(factor > 0.0)) throw DomainError("TestingPolicy: factor must be positive");
    auto check = [&](long day, double a) {
        if (!(a >= 0.0)) {
            std::ostringstream os;
            os << "TestingPolicy: negative tests on day " << day;
            throw DomainError(os.str());
        }
        if (factor * a > population) {
            std::ostringstream os;
            os << "TestingPolicy: factor * tests exceeds the population on day " << day;
            throw DomainError(os.str());
        }
    };
    check(-1, default_alpha);
    for (const auto& [day, a] : alpha_per_day) check(day, a);
}

double delta_detections(const CompartmentState& state, double alpha_t, const ModelParams& params, double t) {
    const double rho = params.rho(t);
    const double pool = std::max(state.undetected(rho), 0.0);
    return alpha_t * pool / params.population;
}

// Under equal death/recovery rates the removal coefficient of I,
// rho*(g1+g2) + (1-rho)*gbar with gbar = g1+g2, is exactly g1+g2; it is
// written that way so that rhs_seir4 with no testing matches bit for bit.
CompartmentState rhs_seir2(const CompartmentState& x, const ModelParams& p, double t) {
    const double N = p.population;
    const double beta = p.beta(t);
    const double g1 = p.gamma1(t);
    const double g2 = p.gamma2(t);
    const double rho = p.rho(t);
    const double gamma = g1 + g2;

    const double undetected = (1.0 - rho) * x.I;
    const double infection = beta / N * x.S * undetected;
    const double detected = rho * x.I;

    CompartmentState d;
    d.S = -infection;
    d.E = infection - p.sigma * x.E;
    d.I = p.sigma * x.E - gamma * x.I;
    d.T = 0.0;
    d.F1 = g1 * detected;
    d.R1 = g2 * detected;
    d.L = gamma * undetected;
    return d;
}

CompartmentState rhs_seir4(const CompartmentState& x, const ModelParams& p, const TestingPolicy& policy, double t) {
    const double N = p.population;
    const double beta = p.beta(t);
    const double g1 = p.gamma1(t);
    const double g2 = p.gamma2(t);
    const double rho = p.rho(t);
    const double gamma = g1 + g2;

    const double undetected = (1.0 - rho) * x.I - x.T;
    // Clamped pool: T must never exceed (1 - rho) I.
    const double pool = std::max(undetected, 0.0);
    const double infection = beta / N * x.S * pool;
    const double detected = rho * x.I + x.T;
    const double alpha = policy.alpha_at(t);
    const double delta = alpha > 0.0 ? policy.factor * alpha * pool / N : 0.0;

    CompartmentState d;
    d.S = -infection;
    d.E = infection - p.sigma * x.E;
    d.I = p.sigma * x.E - gamma * x.I;
    d.T = delta - gamma * x.T;
    d.F1 = g1 * detected;
    d.R1 = g2 * detected;
    d.L = gamma * undetected;
    return d;
}

void ConstantParams::validate() const {
    if (!(beta >= 0.0 && gamma >= 0.0 && sigma >= 0.0 && alpha >= 0.0)) {
        throw DomainError("ConstantParams: beta, gamma, sigma and alpha must be nonnegative");
    }
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("ConstantParams: rho must lie in [0, 1)");
    if (!(N > 0.0)) throw DomainError("ConstantParams: N must be positive");
}

Seir5State rhs_seir5(const Seir5State& x, const ConstantParams& p) {
    const double y = (1.0 - p.rho) * x.I - x.T;
    const double infection = p.beta / p.N * x.S * y;
    Seir5State d;
    d.S = -infection;
    d.E = infection - p.sigma * x.E;
    d.I = p.sigma * x.E - p.gamma * x.I;
    d.T = p.alpha * y / p.N - p.gamma * x.T;
    d.R = p.gamma * x.I;
    return d;
}

ConstantParams constant_snapshot(const ModelParams& params, double t, double alpha) {
    ConstantParams c;
    c.beta = params.beta(t);
    c.gamma = params.gamma1(t) + params.gamma2(t);
    c.sigma = params.sigma;
    c.rho = params.rho(t);
    c.alpha = alpha;
    c.N = params.population;
    return c;
}

}  // namespace seirt
