#pragma once

#include "seirt/model.hpp"

#include <span>
#include <utility>
#include <vector>

namespace seirt {

/**
 * Long-run number of susceptible individuals for the constant-coefficient
 * testing system. Returns the smaller root x1 of
 *
 *   f(x) = (alpha + gamma N) log(x / S0) + beta (1 - rho)(N - R0 - x) - T0 beta
 *
 * on (0, x0), x0 = (alpha + gamma N) / (beta (1 - rho)), located by bisection
 * to a relative tolerance of 1e-12.
 *
 * Throws DomainError when f(x0) <= 0 (no admissible root) or when
 * alpha + gamma N is not positive.
 */
double limit_susceptible(const ConstantParams& p, double S0, double R0_init, double T0);

/// The function whose smaller root limit_susceptible() returns.
double final_size_residual(const ConstantParams& p, double S0, double R0_init, double T0, double x);

enum class ScanParameter { alpha, rho };

struct ScanPoint {
    double value = 0.0;
    double s_infinity = 0.0;
};

/// S-infinity along a strictly increasing grid of alpha or rho values.
std::vector<ScanPoint> monotonicity_scan(const ConstantParams& p, ScanParameter which, std::span<const double> grid,
                                         double S0, double R0_init, double T0);

/// (1/gamma)(beta (1 - rho) - alpha / N); may be negative.
double basic_reproduction_number(const ConstantParams& p);

/// Alternative threshold quantity beta (1 - rho) / (gamma + alpha / N).
double alternative_reproduction_number(const ConstantParams& p);

/// (1/gamma)(S_t / N * beta (1 - rho) - alpha / N).
double effective_reproduction_number(const ConstantParams& p, double S_t);

struct StabilityReport {
    bool stable = false;
    // Characteristic polynomial lambda^3 + a2 lambda^2 + a1 lambda + a0.
    double a2 = 0.0;
    double a1 = 0.0;
    double a0 = 0.0;
};

/// Routh-Hurwitz test of the disease-free equilibrium's infective subsystem.
StabilityReport is_stable(const ConstantParams& p);

}  // namespace seirt
