#include "seirt/analysis.hpp"

#include "seirt/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace seirt {

namespace {

constexpr double kRelTol = 1e-12;

}  // namespace

double final_size_residual(const ConstantParams& p, double S0, double R0_init, double T0, double x) {
    return (p.alpha + p.gamma * p.N) * std::log(x / S0) + p.beta * (1.0 - p.rho) * (p.N - R0_init - x) - T0 * p.beta;
}

double limit_susceptible(const ConstantParams& p, double S0, double R0_init, double T0) {
    p.validate();
    if (!(S0 > 0.0)) throw DomainError("limit_susceptible: S0 must be positive");
    const double drain = p.alpha + p.gamma * p.N;
    if (!(drain > 0.0)) throw DomainError("limit_susceptible: alpha + gamma N must be positive");
    const double force = p.beta * (1.0 - p.rho);
    if (force == 0.0) {
        // f is monotone; its single root is S0 exp(T0 beta / drain) = S0 when beta = 0.
        return S0 * std::exp(T0 * p.beta / drain);
    }

    const double x0 = drain / force;
    auto f = [&](double x) { return final_size_residual(p, S0, R0_init, T0, x); };
    if (!(f(x0) > 0.0)) {
        std::ostringstream os;
        os << "limit_susceptible: f(x0) = " << f(x0) << " <= 0 at x0 = " << x0 << "; inputs are inconsistent";
        throw DomainError(os.str());
    }

    // f tends to -inf as x -> 0, so a small enough lower end always exists.
    double lo = x0;
    do {
        lo *= 1e-10;
        if (lo < std::numeric_limits<double>::min()) return 0.0;
    } while (f(lo) > 0.0);
    double hi = x0;
    // Geometric bisection: the root can lie many decades below N.
    for (int it = 0; it < 400 && (hi - lo) > kRelTol * hi; ++it) {
        const double mid = hi / lo > 4.0 ? std::sqrt(lo) * std::sqrt(hi) : 0.5 * (lo + hi);
        if (f(mid) > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<ScanPoint> monotonicity_scan(const ConstantParams& p, ScanParameter which, std::span<const double> grid,
                                         double S0, double R0_init, double T0) {
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw DomainError("monotonicity_scan: grid must be strictly increasing");
    }
    std::vector<ScanPoint> out;
    out.reserve(grid.size());
    for (const double v : grid) {
        ConstantParams q = p;
        (which == ScanParameter::alpha ? q.alpha : q.rho) = v;
        out.push_back({v, limit_susceptible(q, S0, R0_init, T0)});
    }
    return out;
}

double basic_reproduction_number(const ConstantParams& p) {
    if (p.gamma == 0.0) throw DomainError("basic_reproduction_number: gamma is zero");
    return (p.beta * (1.0 - p.rho) - p.alpha / p.N) / p.gamma;
}

double alternative_reproduction_number(const ConstantParams& p) {
    const double denom = p.gamma + p.alpha / p.N;
    if (denom == 0.0) throw DomainError("alternative_reproduction_number: gamma + alpha/N is zero");
    return p.beta * (1.0 - p.rho) / denom;
}

double effective_reproduction_number(const ConstantParams& p, double S_t) {
    if (p.gamma == 0.0) throw DomainError("effective_reproduction_number: gamma is zero");
    return (S_t / p.N * p.beta * (1.0 - p.rho) - p.alpha / p.N) / p.gamma;
}

StabilityReport is_stable(const ConstantParams& p) {
    const double drain = p.alpha / p.N;
    StabilityReport r;
    r.a2 = p.sigma + 2.0 * p.gamma + drain;
    r.a1 = (p.sigma + p.gamma) * (drain + p.gamma) + p.sigma * p.gamma;
    r.a0 = p.sigma * p.gamma * (drain + p.gamma - p.beta * (1.0 - p.rho));
    r.stable = r.a2 > 0.0 && r.a0 > 0.0 && r.a2 * r.a1 - r.a0 > 0.0;
    return r;
}

}  // namespace seirt
