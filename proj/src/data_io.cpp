#include "seirt/data_io.hpp"

#include "seirt/errors.hpp"
#include "seirt/integrator.hpp"
#include "seirt/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace seirt {

namespace {

using std::chrono::days;
using std::chrono::sys_days;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return in;
}

std::string rows_text(const std::vector<std::size_t>& rows) {
    std::string s;
    for (std::size_t k = 0; k < rows.size() && k < 20; ++k) {
        if (k) s += ", ";
        s += std::to_string(rows[k]);
    }
    if (rows.size() > 20) s += ", ...";
    return s;
}

struct Row {
    std::size_t line = 0;
    sys_days date;
    std::optional<double> cases, deaths, recovered;
};

std::optional<double> optional_number(const std::string& field, const std::string& what) {
    if (field.empty()) return std::nullopt;
    return parse_number(field, what);
}

// Forward-fills missing values and dates, then validates monotonicity.
RawSeries assemble(const std::string& id, const std::vector<Row>& rows, bool with_recovered) {
    RawSeries s;
    s.location_id = id;
    if (with_recovered) s.recovered.emplace();
    std::vector<std::size_t> source;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Row& r = rows[k];
        const std::string where = "row " + std::to_string(r.line);
        if (k > 0 && r.date <= s.dates.back()) {
            throw ValidationError(where + ": dates of " + id + " must be strictly increasing");
        }
        if (k == 0 && (!r.cases || !r.deaths || (with_recovered && !r.recovered))) {
            throw ValidationError(where + ": the first row of " + id + " cannot have missing values");
        }
        while (k > 0 && s.dates.back() + days{1} < r.date) {
            s.dates.push_back(s.dates.back() + days{1});
            s.cases.push_back(s.cases.back());
            s.deaths.push_back(s.deaths.back());
            if (with_recovered) s.recovered->push_back(s.recovered->back());
            s.filled.push_back(true);
            source.push_back(r.line);
        }
        const bool missing = !r.cases || !r.deaths || (with_recovered && !r.recovered);
        s.dates.push_back(r.date);
        s.cases.push_back(r.cases.value_or(k ? s.cases.back() : 0.0));
        s.deaths.push_back(r.deaths.value_or(k ? s.deaths.back() : 0.0));
        if (with_recovered) s.recovered->push_back(r.recovered.value_or(s.recovered->back()));
        s.filled.push_back(missing);
        source.push_back(r.line);
    }

    std::vector<std::size_t> bad;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const bool negative = s.cases[k] < 0 || s.deaths[k] < 0 || (with_recovered && (*s.recovered)[k] < 0);
        const bool decreasing = k > 0 && (s.cases[k] < s.cases[k - 1] || s.deaths[k] < s.deaths[k - 1] ||
                                          (with_recovered && (*s.recovered)[k] < (*s.recovered)[k - 1]));
        if (negative || decreasing || s.deaths[k] > s.cases[k]) bad.push_back(source[k]);
    }
    if (!bad.empty()) {
        bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
        throw ValidationError("location " + id + ": cumulative counts must be nonnegative, non-decreasing and deaths <= cases; offending rows: " +
                              rows_text(bad));
    }
    return s;
}

double round_count(double v) { return std::round(std::max(v, 0.0)); }

}  // namespace

void RawSeries::validate() const {
    const auto n = dates.size();
    if (cases.size() != n || deaths.size() != n || filled.size() != n || (recovered && recovered->size() != n)) {
        throw ValidationError("series " + location_id + ": column lengths differ");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0 && dates[k] != dates[k - 1] + days{1}) {
            throw ValidationError("series " + location_id + ": dates must be consecutive at " + format_date(dates[k]));
        }
        const bool decreasing = k > 0 && (cases[k] < cases[k - 1] || deaths[k] < deaths[k - 1] ||
                                          (recovered && (*recovered)[k] < (*recovered)[k - 1]));
        if (decreasing || deaths[k] > cases[k] || deaths[k] < 0) {
            throw ValidationError("series " + location_id + ": invalid counts at " + format_date(dates[k]));
        }
    }
}

std::vector<RawSeries> read_timeseries(std::istream& is, Schema schema, const std::string& single_location_id) {
    static const std::vector<std::string> kA{"date", "location_id", "cumulative_cases", "cumulative_deaths"};
    static const std::vector<std::string> kB{"date", "cumulative_cases", "cumulative_deaths", "cumulative_recovered"};

    std::string line;
    if (!std::getline(is, line) || split_csv_line(line) == std::vector<std::string>{""}) {
        throw ValidationError("time series: empty input");
    }
    const auto header = split_csv_line(line);
    const std::set<std::string> known{"date", "location_id", "cumulative_cases", "cumulative_deaths",
                                      "cumulative_recovered"};
    for (const auto& col : header) {
        if (!known.count(col)) throw ValidationError("time series: unknown column '" + col + "'");
    }
    auto has = [&](const std::string& col) { return std::find(header.begin(), header.end(), col) != header.end(); };
    if (schema == Schema::detect) schema = has("location_id") ? Schema::per_location : Schema::single_location;
    const auto& required = schema == Schema::per_location ? kA : kB;
    for (const auto& col : required) {
        if (!has(col)) throw ValidationError("time series: missing column '" + col + "'");
    }
    if (header.size() != required.size()) throw ValidationError("time series: columns do not match the schema");
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < header.size(); ++k) index[header[k]] = k;

    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> rows;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        const std::string where = "row " + std::to_string(line_no);
        if (f.size() != header.size()) throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields");
        Row r;
        r.line = line_no;
        try {
            r.date = parse_date(f[index["date"]]);
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        r.cases = optional_number(f[index["cumulative_cases"]], where + " cumulative_cases");
        r.deaths = optional_number(f[index["cumulative_deaths"]], where + " cumulative_deaths");
        std::string id = single_location_id;
        if (schema == Schema::per_location) {
            id = f[index["location_id"]];
            if (id.empty()) throw ValidationError(where + ": empty location_id");
        } else {
            r.recovered = optional_number(f[index["cumulative_recovered"]], where + " cumulative_recovered");
        }
        if (!rows.count(id)) order.push_back(id);
        rows[id].push_back(r);
    }
    if (order.empty()) throw ValidationError("time series: no data rows");

    std::vector<RawSeries> out;
    for (const auto& id : order) out.push_back(assemble(id, rows[id], schema == Schema::single_location));
    return out;
}

std::vector<RawSeries> load_timeseries(const std::string& path, Schema schema, const std::string& single_location_id) {
    auto in = open_input(path);
    return read_timeseries(in, schema, single_location_id);
}

void write_timeseries(std::ostream& os, std::span<const RawSeries> series, Schema schema) {
    if (schema == Schema::detect) throw DomainError("write_timeseries: schema must be explicit");
    if (schema == Schema::single_location) {
        if (series.size() != 1 || !series[0].recovered) {
            throw DomainError("write_timeseries: the single-location schema needs one series with recovered counts");
        }
        os << "date,cumulative_cases,cumulative_deaths,cumulative_recovered\n";
        const auto& s = series[0];
        for (std::size_t k = 0; k < s.size(); ++k) {
            os << format_date(s.dates[k]) << ',' << format_number(s.cases[k]) << ',' << format_number(s.deaths[k])
               << ',' << format_number((*s.recovered)[k]) << '\n';
        }
        return;
    }
    os << "date,location_id,cumulative_cases,cumulative_deaths\n";
    for (const auto& s : series) {
        for (std::size_t k = 0; k < s.size(); ++k) {
            os << format_date(s.dates[k]) << ',' << s.location_id << ',' << format_number(s.cases[k]) << ','
               << format_number(s.deaths[k]) << '\n';
        }
    }
}

ObservationSeries reconstruct_observations(const RawSeries& raw, sys_days origin) {
    raw.validate();
    ObservationSeries obs;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        obs.days.push_back(static_cast<int>((raw.dates[k] - origin).count()));
        const double C = raw.cases[k];
        const double F = raw.deaths[k];
        if (raw.recovered) {
            const double R = (*raw.recovered)[k];
            obs.detected.push_back(std::max(C - R - F, 0.0));
            obs.recovered.push_back(R);
        } else {
            const double lagged = k >= 14 ? raw.cases[k - 14] : 0.0;
            obs.detected.push_back(C - lagged);
            obs.recovered.push_back(std::max(lagged - F, 0.0));
        }
        obs.deaths.push_back(F);
    }
    return obs;
}

std::vector<PopulationEntry> read_population_registry(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) ||
        split_csv_line(line) != std::vector<std::string>{"location_id", "name", "population"}) {
        throw ValidationError("population registry: expected header location_id,name,population");
    }
    std::vector<PopulationEntry> out;
    std::set<std::string> ids;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        const std::string where = "population registry row " + std::to_string(line_no);
        if (f.size() != 3) throw ValidationError(where + ": expected 3 fields");
        PopulationEntry e{f[0], f[1], parse_number(f[2], where + " population")};
        if (e.id.empty()) throw ValidationError(where + ": empty location_id");
        if (!(e.population > 0.0)) throw ValidationError(where + ": population must be positive");
        if (!ids.insert(e.id).second) throw ValidationError(where + ": duplicate location_id " + e.id);
        out.push_back(e);
    }
    if (out.empty()) throw ValidationError("population registry: no entries");
    return out;
}

std::vector<PopulationEntry> load_population_registry(const std::string& path) {
    auto in = open_input(path);
    return read_population_registry(in);
}

void write_population_registry(std::ostream& os, std::span<const PopulationEntry> entries) {
    os << "location_id,name,population\n";
    for (const auto& e : entries) os << e.id << ',' << e.name << ',' << format_number(e.population) << '\n';
}

Region build_region(std::span<const RawSeries> series, std::span<const PopulationEntry> registry) {
    if (series.empty()) throw ValidationError("build_region: no series");
    Region region;
    region.origin = series.front().dates.front();
    for (const auto& s : series) region.origin = std::min(region.origin, s.dates.front());
    for (const auto& s : series) {
        const bool known = std::any_of(registry.begin(), registry.end(), [&](const auto& e) { return e.id == s.location_id; });
        if (!known) throw ValidationError("build_region: location " + s.location_id + " is not in the population registry");
    }
    for (const auto& e : registry) {
        const auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.location_id == e.id; });
        if (it == series.end()) continue;
        region.locations.push_back({e.id, e.name, e.population, reconstruct_observations(*it, region.origin)});
    }
    region.validate();
    return region;
}

// ---------------------------------------------------------------------------
// Fixtures

SpainFixture spain_fixture(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("spain_fixture: rho must lie in (0, 1)");
    SpainFixture f;
    f.origin = sys_days{std::chrono::year{2020} / std::chrono::February / 20};
    f.breakpoints = {0.0, 21.0, 41.0, 61.0, 88.0};

    // (c0, c1, r) per interval starting at 0, 21, 41 and 61.
    f.params.beta = DecaySchedule({{1.04, 0.0, 0.0, 0.0, 21.0},
                                   {0.6, 0.596, 0.09, 21.0, 41.0},
                                   {0.04, 0.033, 0.05, 41.0, 61.0},
                                   {0.02, 0.0065, 0.09, 61.0}});
    f.params.gamma1 = DecaySchedule({{0.0069, 0.0, 0.0, 0.0, 21.0},
                                     {0.012, 0.001, 0.05, 21.0, 41.0},
                                     {0.0095, 0.008, 0.065, 41.0, 61.0},
                                     {0.0055, 0.004, 0.075, 61.0}});
    f.params.gamma2 = DecaySchedule({{0.014, 0.0, 0.0, 0.0, 21.0},
                                     {0.016, -0.04, 0.025, 21.0, 41.0},
                                     {0.055, 0.025, 0.44, 41.0, 61.0},
                                     {0.025, -0.01, 0.93, 61.0}});
    f.params.rho = DecaySchedule::constant(rho, 0.0);
    f.params.sigma = 0.2;
    f.params.population = 47e6;
    f.params.validate();

    f.initial.I = 3.0 / rho;
    f.initial.E = 160.0;
    f.initial.S = f.params.population - f.initial.I - f.initial.E;
    return f;
}

RawSeries spain_series(const SpainFixture& f) {
    const Trajectory traj = simulate_seir4(f.params, TestingPolicy{}, f.initial, 0.0, f.last_day);
    RawSeries s;
    s.location_id = "ES";
    s.recovered.emplace();
    for (const auto& sample : traj.samples) {
        const auto& x = sample.state;
        const double F = round_count(x.F1);
        const double R = round_count(x.R1);
        s.dates.push_back(f.origin + days{static_cast<int>(sample.t)});
        s.deaths.push_back(F);
        s.recovered->push_back(R);
        s.cases.push_back(round_count(x.detected(f.params.rho(sample.t)) + x.F1 + x.R1));
        s.filled.push_back(false);
    }
    return s;
}

SyntheticRegion synthetic_region() {
    struct Spec {
        const char* id;
        const char* name;
        double population;
        DecaySegment beta;
        double gamma1, gamma2;
        double exposed, infected;
    };
    // A low-prevalence town, a large city with a fast-growing outbreak and a
    // district whose outbreak is already fading.
    const Spec specs[] = {
        {"NF", "Northfield", 1'200'000.0, {0.20, 0.0, 0.0, 0.0}, 0.002, 0.08, 40.0, 20.0},
        {"EB", "Eastbrook", 2'400'000.0, {0.30, 0.0, 0.0, 0.0}, 0.002, 0.08, 200.0, 100.0},
        {"SV", "Southvale", 800'000.0, {0.35, 0.29, 0.1, 0.0}, 0.002, 0.08, 3000.0, 2000.0},
    };
    constexpr double kRho = 0.1;
    constexpr int kLastDay = 63;

    SyntheticRegion out;
    out.plan_start = 35;
    out.horizon = 21;
    const sys_days origin{std::chrono::year{2020} / std::chrono::March / 15};
    for (const auto& sp : specs) {
        ModelParams p;
        p.beta = DecaySchedule({sp.beta});
        p.gamma1 = DecaySchedule::constant(sp.gamma1);
        p.gamma2 = DecaySchedule::constant(sp.gamma2);
        p.rho = DecaySchedule::constant(kRho);
        p.sigma = 0.2;
        p.population = sp.population;
        p.validate();

        CompartmentState x0;
        x0.E = sp.exposed;
        x0.I = sp.infected;
        x0.S = sp.population - x0.E - x0.I;

        const Trajectory traj = simulate_seir4(p, TestingPolicy{}, x0, 0.0, kLastDay);
        RawSeries s;
        s.location_id = sp.id;
        for (const auto& sample : traj.samples) {
            const auto& x = sample.state;
            s.dates.push_back(origin + days{static_cast<int>(sample.t)});
            s.cases.push_back(round_count(x.detected(kRho) + x.F1 + x.R1));
            s.deaths.push_back(round_count(x.F1));
            s.filled.push_back(false);
        }
        out.series.push_back(std::move(s));
        out.registry.push_back({sp.id, sp.name, sp.population});
        out.truth.push_back(std::move(p));
        out.initial.push_back(x0);
    }
    out.region = build_region(out.series, out.registry);
    return out;
}

}  // namespace seirt
