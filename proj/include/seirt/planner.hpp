#pragma once

#include "seirt/estimation.hpp"
#include "seirt/model.hpp"

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace seirt {

struct Location {
    std::string id;
    std::string name;
    double population = 0.0;
    ObservationSeries observations;
};

struct Region {
    std::vector<Location> locations;
    std::chrono::sys_days origin{};  // calendar date of day 0

    /// Unique ids, positive populations, valid observations.
    void validate() const;
    std::size_t size() const noexcept { return locations.size(); }
};

/// Daily cap on tests over all locations.
struct CapacityRule {
    enum class Mode { absolute_daily_cap, fraction_of_total };
    Mode mode = Mode::absolute_daily_cap;
    double value = 10000.0;

    void validate() const;
    /// Tests per day allowed for a plan with the given total budget.
    long long daily_cap(long long total_tests) const;
    /// "absolute:10000" or "fraction:0.1"; throws ValidationError otherwise.
    static CapacityRule parse(const std::string& text);
    std::string to_string() const;
};

/// Forecast saved infections for K tests on location l, day first_day + j.
struct GainMatrix {
    int t = 0;          // instant the forecast was made
    int first_day = 0;  // day of column 0, t + 1
    std::vector<std::vector<double>> g;  // [location][column]
    std::vector<bool> flagged;           // rows zeroed for lack of data

    std::size_t rows() const noexcept { return g.size(); }
    std::size_t columns() const noexcept { return g.empty() ? 0 : g.front().size(); }
};

struct DistributionMatrix {
    int first_day = 0;
    std::vector<std::vector<long long>> d;  // [location][column]
    long long unassigned = 0;

    DistributionMatrix() = default;
    DistributionMatrix(std::size_t locations, std::size_t days, int first_day);

    std::size_t rows() const noexcept { return d.size(); }
    std::size_t columns() const noexcept { return d.empty() ? 0 : d.front().size(); }
    long long column_sum(std::size_t j) const;
    long long row_sum(std::size_t l) const;
    long long total() const;
    /// Tests per day for one location, as a testing policy.
    TestingPolicy policy(std::size_t l, double factor) const;
};

/// Greedy allocation: repeatedly take the largest positive gain (ties to the
/// smallest location, then the earliest day) and give it as many tests as the
/// remaining budget, the column's cap and floor(N_l / factor) allow. Tests
/// already given to a location count against its population cap through
/// `prior_per_location`.
DistributionMatrix test_distribution(const GainMatrix& G, long long total_tests, long long daily_cap,
                                     std::span<const double> populations, double factor,
                                     std::span<const long long> prior_per_location = {});

/// Budget split proportionally to population by largest remainder (ties to
/// the smaller index), then spread evenly over `days`; each location's
/// remainder goes to its last day.
DistributionMatrix homogeneous_plan(std::span<const double> populations, long long total_tests, int days,
                                    int first_day);

struct EstimationSettings {
    std::optional<double> fixed_rho = 0.1;
    SegmentShape shape = SegmentShape::constant;
    GeneBounds bounds;
    FitnessWeights weights;
    double sigma = 0.2;
    double step = 0.25;
    int period = 7;
    int min_tail = 4;
    int window = 21;          // days of data used by each rolling fit
    std::size_t min_days = 7;  // fewer observations: no estimate
    DEConfig de{.polish_evaluations = 5000};  // de.rng_seed is the master seed
};

/// A fitted location: parameters plus the state reached at day t without testing.
struct LocationModel {
    FitResult fit;
    ModelParams params;
    CompartmentState state;
    int t = 0;
};

/// Fits observations in [first_day, last_day]. Returns nullopt when fewer than
/// settings.min_days observations fall inside the window or the fit fails.
std::optional<LocationModel> estimate_location(const Location& location, std::size_t index, int first_day,
                                               int last_day, const EstimationSettings& settings);

/// Memoises rolling fits per (location, last day). Fits are seeded from
/// (master seed, location, window), so cached and fresh results coincide.
class EstimationCache {
public:
    explicit EstimationCache(EstimationSettings settings) : settings_(std::move(settings)) {}

    const std::optional<LocationModel>& rolling(const Region& region, std::size_t l, int t);
    const std::optional<LocationModel>& window(const Region& region, std::size_t l, int first_day, int last_day);

    const EstimationSettings& settings() const noexcept { return settings_; }
    std::size_t fits() const noexcept { return fits_; }

private:
    EstimationSettings settings_;
    std::map<std::tuple<std::size_t, int, int>, std::optional<LocationModel>> cache_;
    std::size_t fits_ = 0;
};

struct GainSettings {
    long long tests_per_block = 10000;  // K
    double factor = 1.0;
    int lookahead = 14;       // columns t+1 .. t+lookahead
    int forecast_lag = 14;    // gains measured at t+i+lag
    int last_day = 0;         // columns beyond this day are not created (0: no limit)
    double step = kDefaultStep;
};

/**
 * Gain of K tests at day t+i for every location: S with tests minus S without
 * at t+i+lag, both forecast from the location's fitted state at t. Zero when
 * the effective reproduction number at t+i (no testing, forecast S) is below
 * one. Rows with no model are zero and flagged.
 */
GainMatrix gain_matrix(const Region& region, std::span<const std::optional<LocationModel>> models, int t,
                       const GainSettings& settings);

struct PlanConfig {
    long long total_tests = 0;
    CapacityRule cap;
    double factor = 1.0;
    int start = 0;    // P: last day of data known before the first committed day
    int horizon = 1;  // M: committed days are start+1 .. start+M
    std::optional<long long> tests_per_block;  // K; defaults to the daily cap
    int lookahead = 14;
    int forecast_lag = 14;
    int evaluation_lag = 14;  // savings are measured at start+horizon+evaluation_lag
    double step = kDefaultStep;

    void validate() const;
    int evaluation_day() const noexcept { return start + horizon + evaluation_lag; }
};

struct RollingPlan {
    DistributionMatrix plan;
    std::vector<std::string> log;
};

/// Rolling commitment: for t = P .. P+M-1 re-estimate with data up to t,
/// rebuild G and D for the remaining budget and keep only column t+1.
RollingPlan rolling_plan(const Region& region, const PlanConfig& config, EstimationCache& cache);

struct SavingReport {
    double infections_without = 0.0;  // cumulative N - S summed over locations
    double infections_with = 0.0;
    double saved = 0.0;
    std::vector<double> saved_per_location;
    long long tests_used = 0;
    long long unassigned = 0;
    int end_day = 0;
};

/// Simulation models: one fit per location over [P + 1 - window, P + M].
std::vector<LocationModel> simulation_models(const Region& region, const PlanConfig& config,
                                             EstimationCache& cache);

/// Integrates every location twice (no tests, and tests from `plan`) up to
/// `end_day` and reports the difference in cumulative infections.
SavingReport evaluate_plan(const Region& region, std::span<const LocationModel> models,
                           const DistributionMatrix& plan, double factor, int end_day, double step = kDefaultStep);

/// Plan CSV: day,location_id,location_name,tests (nonzero cells only).
void write_plan_csv(std::ostream& os, const Region& region, const DistributionMatrix& plan);
DistributionMatrix read_plan_csv(std::istream& is, const Region& region, int first_day, int days);

void write_saving_report(std::ostream& os, const SavingReport& report, const std::string& title);

}  // namespace seirt
