#pragma once

#include "seirt/estimation.hpp"
#include "seirt/model.hpp"
#include "seirt/planner.hpp"

#include <chrono>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seirt {

enum class Schema {
    per_location,     // date,location_id,cumulative_cases,cumulative_deaths
    single_location,  // date,cumulative_cases,cumulative_deaths,cumulative_recovered
    detect,           // decide from the header
};

/// Daily cumulative counts of one location, gaps already filled.
struct RawSeries {
    std::string location_id;
    std::vector<std::chrono::sys_days> dates;
    std::vector<double> cases;
    std::vector<double> deaths;
    std::optional<std::vector<double>> recovered;
    std::vector<bool> filled;  // row was forward-filled (missing value or date)

    std::size_t size() const noexcept { return dates.size(); }
    /// Consecutive days, non-decreasing counts, deaths <= cases.
    void validate() const;
};

/// Throws ValidationError for empty input, unknown columns, bad rows and
/// non-monotone cumulative counts (the message names the offending rows).
std::vector<RawSeries> read_timeseries(std::istream& is, Schema schema = Schema::detect,
                                       const std::string& single_location_id = "ES");
std::vector<RawSeries> load_timeseries(const std::string& path, Schema schema = Schema::detect,
                                       const std::string& single_location_id = "ES");
void write_timeseries(std::ostream& os, std::span<const RawSeries> series, Schema schema);

/**
 * Active detected, deaths and recovered per day index (date - origin). With a
 * recovered column D = C - R - F; otherwise a 14-day window:
 * D(t) = C(t) - C(t-14) and R(t) = max(C(t-14) - F(t), 0), C before the
 * series taken as 0.
 */
ObservationSeries reconstruct_observations(const RawSeries& raw, std::chrono::sys_days origin);

struct PopulationEntry {
    std::string id;
    std::string name;
    double population = 0.0;
};

std::vector<PopulationEntry> read_population_registry(std::istream& is);
std::vector<PopulationEntry> load_population_registry(const std::string& path);
void write_population_registry(std::ostream& os, std::span<const PopulationEntry> entries);

/// Locations in registry order; day 0 is the earliest date over all series.
Region build_region(std::span<const RawSeries> series, std::span<const PopulationEntry> registry);

/// Published parameters of the national outbreak from 20 Feb 2020.
struct SpainFixture {
    ModelParams params;
    CompartmentState initial;  // I0 = 3 / rho, E0 = 160
    std::chrono::sys_days origin;
    std::vector<double> breakpoints;  // 0, 21, 41, 61 and the window end 88
    int last_day = 87;                // 17 May
};

SpainFixture spain_fixture(double rho = 0.1);

/// Rounded daily cumulative counts (with recovered) simulated from the fixture
/// over its data window.
RawSeries spain_series(const SpainFixture& fixture);

/// Three-location test region with heterogeneous size and prevalence.
struct SyntheticRegion {
    Region region;
    std::vector<RawSeries> series;
    std::vector<PopulationEntry> registry;
    std::vector<ModelParams> truth;
    std::vector<CompartmentState> initial;
    int plan_start = 0;  // P
    int horizon = 0;     // M
};

SyntheticRegion synthetic_region();

}  // namespace seirt
