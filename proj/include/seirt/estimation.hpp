#pragma once

#include "seirt/integrator.hpp"
#include "seirt/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace seirt {

/// Observed detected-active, dead and recovered counts per day index.
struct ObservationSeries {
    std::vector<int> days;
    std::vector<double> detected;
    std::vector<double> deaths;
    std::vector<double> recovered;

    void validate() const;
    std::size_t size() const noexcept { return days.size(); }
    bool empty() const noexcept { return days.empty(); }
    int first_day() const { return days.front(); }
    int last_day() const { return days.back(); }
    /// Observations with day <= `day`.
    ObservationSeries up_to(int day) const;
};

/// Weights of the three Euclidean error terms; must sum to 1.
struct FitnessWeights {
    double a1 = 0.35;  // detected
    double a2 = 0.35;  // deaths
    double a3 = 0.30;  // recovered

    void validate() const;
};

/// a1 ||D_obs - D|| + a2 ||F1_obs - F1|| + a3 ||R1_obs - R1||, all spans equal length.
double weighted_error(const ObservationSeries& obs, std::span<const double> detected, std::span<const double> deaths,
                      std::span<const double> recovered, const FitnessWeights& w);

/// Same weighting applied to the observations themselves (error against zero).
double weighted_norm(const ObservationSeries& obs, const FitnessWeights& w);

/**
 * Integrates the tracing-only system from init (taken at obs.first_day()) over
 * the observation window and returns weighted_error() against the model's
 * D = rho I, F1 and R1. Integration failure or a non-finite result gives +inf.
 */
double fitness(const ModelParams& params, const CompartmentState& init, const ObservationSeries& obs,
               const FitnessWeights& weights, double step = kDefaultStep);

/// Model minus observation per observed day, one vector per observable.
struct ResidualBlocks {
    std::vector<double> detected;
    std::vector<double> deaths;
    std::vector<double> recovered;

    /// a1‖detected‖ + a2‖deaths‖ + a3‖recovered‖; +inf if not finite.
    double combine(const FitnessWeights& w) const;
};

/// Residuals of a run from init at t_start; nullopt when the integration fails.
std::optional<ResidualBlocks> window_residuals(const ModelParams& params, const CompartmentState& init,
                                               double t_start, const ObservationSeries& obs, double step);

/// As fitness(), with init taken at t_start <= obs.first_day().
double window_fitness(const ModelParams& params, const CompartmentState& init, double t_start,
                      const ObservationSeries& obs, const FitnessWeights& weights, double step = kDefaultStep);

enum class SegmentShape {
    decaying,  // c0, c1, r per coefficient and interval
    constant,  // c0 only
};

/// Gene ranges. Amplitudes of the rate coefficients may be negative (rising
/// segments); beta amplitudes are nonnegative.
struct GeneBounds {
    double beta_max = 3.0;
    double decay_rate_max = 1.0;
    double gamma_max = 0.5;
    double gamma_amplitude_max = 0.5;
    double rho_min = 0.01;
    double rho_max = 0.9;
    double exposed_factor = 100.0;  // E0 in [0, exposed_factor * I0]
};

struct Gene {
    std::string name;
    int interval = -1;  // -1 for global genes
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct ParameterVector {
    std::vector<Gene> genes;

    std::vector<double> values() const;
    /// Throws ValidationError when the gene is absent.
    const Gene& find(const std::string& name, int interval) const;
};

/// Quantities fixed by the data that the decoded initial state depends on.
struct InitialData {
    double t0 = 0.0;
    double detected = 0.0;
    double deaths = 0.0;
    double recovered = 0.0;
};

/**
 * Maps a flat gene array onto ModelParams and an initial state. Gene order per
 * interval: beta (c0, c1, r), gamma1 (c0, c1, r), gamma2 (c0, c1, r), then rho
 * when estimated; E0 is last. The constant shape keeps only the c0 genes.
 */
class GeneLayout {
public:
    GeneLayout() = default;
    GeneLayout(std::vector<double> breakpoints, SegmentShape shape, std::optional<double> fixed_rho, double population,
               double sigma, InitialData initial, GeneBounds bounds = {});

    std::size_t dimension() const noexcept { return lower_.size(); }
    std::size_t intervals() const noexcept { return breakpoints_.size() - 1; }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    SegmentShape shape() const noexcept { return shape_; }
    const std::optional<double>& fixed_rho() const noexcept { return fixed_rho_; }
    double population() const noexcept { return population_; }
    double sigma() const noexcept { return sigma_; }
    const InitialData& initial() const noexcept { return initial_; }
    const GeneBounds& bounds() const noexcept { return bounds_; }

    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    const std::string& name(std::size_t k) const { return names_[k]; }
    int interval_of(std::size_t k) const { return intervals_[k]; }

    /// Clamp to bounds, then cap every positive amplitude by its start value so
    /// that no decoded coefficient can become negative.
    void repair(std::span<double> genes) const;

    ModelParams decode(std::span<const double> genes) const;
    /// Throws DomainError when the genes leave no room for S.
    CompartmentState initial_state(std::span<const double> genes) const;

    ParameterVector to_parameter_vector(std::span<const double> genes) const;

private:
    std::size_t genes_per_interval() const;

    std::vector<double> breakpoints_;  // interval starts followed by the window end
    SegmentShape shape_ = SegmentShape::decaying;
    std::optional<double> fixed_rho_;
    double population_ = 0.0;
    double sigma_ = 0.2;
    InitialData initial_;
    GeneBounds bounds_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<std::string> names_;
    std::vector<int> intervals_;
};

/// Breakpoints every `period` days from first_day, plus the window end
/// (last_day + 1). A trailing piece shorter than `min_tail` days is merged
/// into the previous interval.
std::vector<double> periodic_breakpoints(int first_day, int last_day, int period = 7, int min_tail = 4);

/// Explicit interval starts; keeps those inside the window, prepends
/// first_day when needed and appends last_day + 1.
std::vector<double> explicit_breakpoints(std::vector<double> starts, int first_day, int last_day);

struct FitProblem {
    ObservationSeries observations;
    std::vector<double> breakpoints;  // from periodic_breakpoints/explicit_breakpoints
    double population = 0.0;
    double sigma = 0.2;
    std::optional<double> fixed_rho;  // estimated per interval when empty
    SegmentShape shape = SegmentShape::decaying;
    GeneBounds bounds;
    FitnessWeights weights;
    double step = kDefaultStep;

    GeneLayout layout() const;
};

struct DEConfig {
    std::size_t population_size = 5;
    std::size_t max_stale_generations = 1000;
    std::uint64_t rng_seed = 0;
    std::size_t max_generations = 0;  // 0: no cap besides the stale rule
    std::size_t polish_evaluations = 100000;  // least-squares budget after DE (0: DE only)
};

struct Individual {
    std::vector<double> genes;
    double fitness = 0.0;
};

using Population = std::vector<Individual>;
using FitnessFn = std::function<double(std::span<const double>)>;
using RepairFn = std::function<void(std::span<double>)>;

/// u = x_i + K (x_r3 - x_i) + F (x_r1 - x_r2).
std::vector<double> mutate(std::span<const double> x_i, std::span<const double> x_r1, std::span<const double> x_r2,
                           std::span<const double> x_r3, double K, double F);

struct GenerationResult {
    Population population;
    std::size_t replacements = 0;
};

/**
 * One generation: for each i a descendant built from three distinct other
 * members replaces x_i only when strictly fitter. K and F are drawn once per
 * generation from (0, 1].
 */
GenerationResult new_population(const Population& pop, std::mt19937_64& rng, const FitnessFn& fitness_fn,
                                const RepairFn& repair);

/// Weighted residual vector of a gene vector; empty when the model cannot be evaluated.
using ResidualFn = std::function<std::vector<double>(std::span<const double>)>;

/**
 * Bounded Levenberg-Marquardt from x (with value fx) on the residual vector
 * using a forward-difference Jacobian. Trial points are clamped and repaired
 * and a step is kept only when it lowers f, so the result is never worse
 * than fx. Stops after max_evaluations calls of f and residuals together.
 */
double polish_least_squares(const FitnessFn& f, const ResidualFn& residuals, const RepairFn& repair,
                            std::vector<double>& x, double fx, std::span<const double> lower,
                            std::span<const double> upper, std::size_t max_evaluations);

struct FitResult {
    std::string location;
    GeneLayout layout;
    ParameterVector best;
    double fitness = 0.0;
    std::uint64_t seed = 0;
    std::size_t generations = 0;

    ModelParams model_params() const { return layout.decode(best.values()); }
    CompartmentState initial_state() const { return layout.initial_state(best.values()); }
};

struct FitHooks {
    /// Called after initialisation (generation 0) and after every generation.
    std::function<void(std::size_t generation, const Population&)> on_generation;
    /// Individuals injected into the initial population (repaired first).
    std::vector<std::vector<double>> initial_guesses;
};

/**
 * Differential evolution until the stale rule fires, then a polish of the best
 * individual: least-squares descent plus hops that redraw one interval's genes.
 * A population of five tends to collapse onto a low-dimensional subspace well
 * before the optimum. polish_evaluations = 0 returns the DE result unchanged.
 * Throws DomainError on empty observations.
 */
FitResult fit(const FitProblem& problem, const DEConfig& cfg, const FitHooks& hooks = {});

/// Plain-text key/value serialisation; doubles round-trip exactly.
void write_fit_result(std::ostream& os, const FitResult& r);
FitResult read_fit_result(std::istream& is);

/// Stream of independent seeds derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

}  // namespace seirt
