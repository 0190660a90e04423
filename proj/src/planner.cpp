#include "seirt/planner.hpp"

#include "seirt/analysis.hpp"
#include "seirt/errors.hpp"
#include "seirt/integrator.hpp"
#include "seirt/text.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace seirt {

void Region::validate() const {
    std::set<std::string> ids;
    for (const auto& loc : locations) {
        if (loc.id.empty()) throw ValidationError("Region: empty location id");
        if (!ids.insert(loc.id).second) throw ValidationError("Region: duplicate location id " + loc.id);
        if (loc.id.find(',') != std::string::npos || loc.name.find(',') != std::string::npos) {
            throw ValidationError("Region: commas are not allowed in ids or names (" + loc.id + ")");
        }
        if (!(loc.population > 0.0)) throw ValidationError("Region: population of " + loc.id + " must be positive");
        loc.observations.validate();
    }
}

// ---------------------------------------------------------------------------
// Capacity

void CapacityRule::validate() const {
    if (!(value > 0.0)) throw ValidationError("CapacityRule: value must be positive");
    if (mode == Mode::fraction_of_total && value > 1.0) throw ValidationError("CapacityRule: fraction above 1");
}

long long CapacityRule::daily_cap(long long total_tests) const {
    validate();
    if (mode == Mode::absolute_daily_cap) return static_cast<long long>(std::floor(value));
    return static_cast<long long>(std::floor(value * static_cast<double>(total_tests)));
}

CapacityRule CapacityRule::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ValidationError("cap mode '" + text + "': expected absolute:N or fraction:F");
    const std::string mode = text.substr(0, colon);
    CapacityRule r;
    if (mode == "absolute") {
        r.mode = Mode::absolute_daily_cap;
    } else if (mode == "fraction") {
        r.mode = Mode::fraction_of_total;
    } else {
        throw ValidationError("cap mode '" + mode + "': expected absolute or fraction");
    }
    r.value = parse_number(text.substr(colon + 1), "cap value");
    r.validate();
    return r;
}

std::string CapacityRule::to_string() const {
    return (mode == Mode::absolute_daily_cap ? "absolute:" : "fraction:") + format_number(value);
}

// ---------------------------------------------------------------------------
// Distribution matrix

DistributionMatrix::DistributionMatrix(std::size_t locations, std::size_t days, int first)
    : first_day(first), d(locations, std::vector<long long>(days, 0)) {}

long long DistributionMatrix::column_sum(std::size_t j) const {
    long long s = 0;
    for (const auto& row : d) s += row[j];
    return s;
}

long long DistributionMatrix::row_sum(std::size_t l) const {
    return std::accumulate(d[l].begin(), d[l].end(), 0LL);
}

long long DistributionMatrix::total() const {
    long long s = 0;
    for (std::size_t l = 0; l < rows(); ++l) s += row_sum(l);
    return s;
}

TestingPolicy DistributionMatrix::policy(std::size_t l, double factor) const {
    TestingPolicy p;
    p.factor = factor;
    for (std::size_t j = 0; j < columns(); ++j) {
        if (d[l][j] > 0) p.alpha_per_day[first_day + static_cast<long>(j)] = static_cast<double>(d[l][j]);
    }
    return p;
}

DistributionMatrix test_distribution(const GainMatrix& G, long long total_tests, long long daily_cap,
                                     std::span<const double> populations, double factor,
                                     std::span<const long long> prior_per_location) {
    if (total_tests < 0) throw DomainError("test_distribution: negative budget");
    if (daily_cap < 0) throw DomainError("test_distribution: negative daily cap");
    if (!(factor > 0.0)) throw DomainError("test_distribution: factor must be positive");
    if (populations.size() != G.rows()) throw DomainError("test_distribution: one population per row is required");
    if (!prior_per_location.empty() && prior_per_location.size() != G.rows()) {
        throw DomainError("test_distribution: prior usage must match the rows");
    }

    const std::size_t rows = G.rows();
    const std::size_t cols = G.columns();
    DistributionMatrix D(rows, cols, G.first_day);
    auto gains = G.g;
    std::vector<long long> column_used(cols, 0);
    std::vector<long long> location_left(rows);
    for (std::size_t l = 0; l < rows; ++l) {
        const long long prior = prior_per_location.empty() ? 0 : prior_per_location[l];
        location_left[l] = std::max(static_cast<long long>(std::floor(populations[l] / factor)) - prior, 0LL);
    }

    long long remaining = total_tests;
    while (remaining > 0) {
        std::size_t bl = 0, bj = 0;
        double best = 0.0;
        for (std::size_t l = 0; l < rows; ++l) {
            for (std::size_t j = 0; j < cols; ++j) {
                if (gains[l][j] > best) {
                    best = gains[l][j];
                    bl = l;
                    bj = j;
                }
            }
        }
        if (!(best > 0.0)) break;
        const long long amount = std::min({remaining, daily_cap - column_used[bj], location_left[bl]});
        if (amount > 0) {
            D.d[bl][bj] += amount;
            column_used[bj] += amount;
            location_left[bl] -= amount;
            remaining -= amount;
        }
        gains[bl][bj] = 0.0;
    }
    D.unassigned = remaining;
    return D;
}

DistributionMatrix homogeneous_plan(std::span<const double> populations, long long total_tests, int days,
                                    int first_day) {
    if (total_tests < 0) throw DomainError("homogeneous_plan: negative budget");
    if (days < 1) throw DomainError("homogeneous_plan: horizon must be at least one day");
    const double sum = std::accumulate(populations.begin(), populations.end(), 0.0);
    if (!(sum > 0.0)) throw DomainError("homogeneous_plan: total population must be positive");

    const std::size_t n = populations.size();
    std::vector<long long> share(n);
    std::vector<double> remainder(n);
    long long given = 0;
    for (std::size_t l = 0; l < n; ++l) {
        const double exact = static_cast<double>(total_tests) * populations[l];
        share[l] = static_cast<long long>(std::floor(exact / sum));
        remainder[l] = exact - static_cast<double>(share[l]) * sum;
        given += share[l];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; given < total_tests; k = (k + 1) % n) {
        ++share[order[k]];
        ++given;
    }

    DistributionMatrix D(n, static_cast<std::size_t>(days), first_day);
    for (std::size_t l = 0; l < n; ++l) {
        const long long per_day = share[l] / days;
        for (int j = 0; j < days; ++j) D.d[l][j] = per_day;
        D.d[l][days - 1] += share[l] - per_day * days;
    }
    return D;
}

// ---------------------------------------------------------------------------
// Estimation

std::optional<LocationModel> estimate_location(const Location& location, std::size_t index, int first_day,
                                               int last_day, const EstimationSettings& settings) {
    ObservationSeries obs;
    const auto& all = location.observations;
    for (std::size_t k = 0; k < all.size(); ++k) {
        if (all.days[k] < first_day || all.days[k] > last_day) continue;
        obs.days.push_back(all.days[k]);
        obs.detected.push_back(all.detected[k]);
        obs.deaths.push_back(all.deaths[k]);
        obs.recovered.push_back(all.recovered[k]);
    }
    if (obs.size() < std::max<std::size_t>(settings.min_days, 2)) return std::nullopt;

    FitProblem problem;
    problem.breakpoints = periodic_breakpoints(obs.first_day(), obs.last_day(), settings.period, settings.min_tail);
    problem.observations = std::move(obs);
    problem.population = location.population;
    problem.sigma = settings.sigma;
    problem.fixed_rho = settings.fixed_rho;
    problem.shape = settings.shape;
    problem.bounds = settings.bounds;
    problem.weights = settings.weights;
    problem.step = settings.step;

    DEConfig de = settings.de;
    const auto window_key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(first_day)) << 32) |
                            static_cast<std::uint32_t>(last_day);
    de.rng_seed = derive_seed(settings.de.rng_seed, index, window_key);

    LocationModel m;
    m.fit = fit(problem, de);
    m.fit.location = location.id;
    if (!std::isfinite(m.fit.fitness)) return std::nullopt;
    m.params = m.fit.model_params();
    m.t = last_day;
    const CompartmentState init = m.fit.initial_state();
    const int t0 = problem.observations.first_day();
    m.state = last_day > t0 ? advance_seir4(m.params, TestingPolicy{}, init, t0, last_day, settings.step) : init;
    return m;
}

const std::optional<LocationModel>& EstimationCache::window(const Region& region, std::size_t l, int first_day,
                                                            int last_day) {
    const auto key = std::make_tuple(l, first_day, last_day);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        ++fits_;
        it = cache_.emplace(key, estimate_location(region.locations.at(l), l, first_day, last_day, settings_)).first;
    }
    return it->second;
}

const std::optional<LocationModel>& EstimationCache::rolling(const Region& region, std::size_t l, int t) {
    return window(region, l, t - settings_.window + 1, t);
}

// ---------------------------------------------------------------------------
// Gains and rolling plan

GainMatrix gain_matrix(const Region& region, std::span<const std::optional<LocationModel>> models, int t,
                       const GainSettings& s) {
    if (models.size() != region.size()) throw DomainError("gain_matrix: one model slot per location is required");
    if (s.tests_per_block < 0) throw DomainError("gain_matrix: K must be nonnegative");
    if (s.lookahead < 1 || s.forecast_lag < 0) throw DomainError("gain_matrix: bad look-ahead settings");

    int columns = s.lookahead;
    if (s.last_day > 0) columns = std::clamp(s.last_day - t, 0, s.lookahead);

    GainMatrix G;
    G.t = t;
    G.first_day = t + 1;
    G.g.assign(region.size(), std::vector<double>(static_cast<std::size_t>(columns), 0.0));
    G.flagged.assign(region.size(), false);
    if (columns == 0) return G;

    for (std::size_t l = 0; l < region.size(); ++l) {
        if (!models[l]) {
            G.flagged[l] = true;
            continue;
        }
        const LocationModel& m = *models[l];
        const double N = m.params.population;
        const long long K = std::min<long long>(s.tests_per_block, static_cast<long long>(std::floor(N / s.factor)));
        if (K <= 0) continue;

        const Trajectory base =
            simulate_seir4(m.params, TestingPolicy{}, m.state, t, t + columns + s.forecast_lag, s.step);
        for (int i = 1; i <= columns; ++i) {
            const int day = t + i;
            const CompartmentState& at_day = base.at(day);
            const ConstantParams snapshot = constant_snapshot(m.params, day, 0.0);
            if (effective_reproduction_number(snapshot, at_day.S) < 1.0) continue;

            TestingPolicy policy;
            policy.factor = s.factor;
            policy.alpha_per_day[day] = static_cast<double>(K);
            const double target = day + s.forecast_lag;
            const CompartmentState with = advance_seir4(m.params, policy, at_day, day, target, s.step);
            G.g[l][i - 1] = std::max(with.S - base.at(target).S, 0.0);
        }
    }
    return G;
}

void PlanConfig::validate() const {
    if (total_tests < 0) throw ValidationError("plan: total tests must be nonnegative");
    if (!(factor > 0.0)) throw ValidationError("plan: factor must be positive");
    if (horizon < 1) throw ValidationError("plan: horizon must be at least one day");
    if (!(step > 0.0)) throw ValidationError("plan: step must be positive");
    if (tests_per_block && *tests_per_block <= 0) throw ValidationError("plan: tests per block must be positive");
    if (lookahead < 1 || forecast_lag < 0 || evaluation_lag < 0) throw ValidationError("plan: negative lag");
    cap.validate();
}

RollingPlan rolling_plan(const Region& region, const PlanConfig& cfg, EstimationCache& cache) {
    cfg.validate();
    const std::size_t n = region.size();
    const long long cap = cfg.cap.daily_cap(cfg.total_tests);

    GainSettings gs;
    gs.tests_per_block = cfg.tests_per_block.value_or(cap);
    gs.factor = cfg.factor;
    gs.lookahead = cfg.lookahead;
    gs.forecast_lag = cfg.forecast_lag;
    gs.last_day = cfg.start + cfg.horizon;
    gs.step = cfg.step;

    std::vector<double> populations;
    for (const auto& loc : region.locations) populations.push_back(loc.population);

    RollingPlan out;
    out.plan = DistributionMatrix(n, static_cast<std::size_t>(cfg.horizon), cfg.start + 1);
    std::vector<long long> committed(n, 0);
    long long remaining = cfg.total_tests;

    for (int t = cfg.start; t < cfg.start + cfg.horizon; ++t) {
        if (remaining == 0) break;
        std::vector<std::optional<LocationModel>> models;
        models.reserve(n);
        for (std::size_t l = 0; l < n; ++l) models.push_back(cache.rolling(region, l, t));

        const GainMatrix G = gain_matrix(region, models, t, gs);
        for (std::size_t l = 0; l < n; ++l) {
            if (G.flagged[l]) {
                out.log.push_back("day " + std::to_string(t) + ": no estimate for " + region.locations[l].id +
                                  ", gains set to zero");
            }
        }
        const DistributionMatrix D = test_distribution(G, remaining, cap, populations, cfg.factor, committed);
        const auto j = static_cast<std::size_t>(t - cfg.start);
        for (std::size_t l = 0; l < n; ++l) {
            const long long tests = D.columns() > 0 ? D.d[l][0] : 0;
            out.plan.d[l][j] = tests;
            committed[l] += tests;
            remaining -= tests;
        }
    }
    out.plan.unassigned = remaining;
    if (out.plan.total() + out.plan.unassigned != cfg.total_tests) {
        throw DomainError("rolling_plan: budget bookkeeping failed");
    }
    return out;
}

std::vector<LocationModel> simulation_models(const Region& region, const PlanConfig& cfg, EstimationCache& cache) {
    std::vector<LocationModel> out;
    const int first = cfg.start + 1 - cache.settings().window;
    const int last = cfg.start + cfg.horizon;
    for (std::size_t l = 0; l < region.size(); ++l) {
        const auto& m = cache.window(region, l, first, last);
        if (!m) throw DomainError("no simulation model for location " + region.locations[l].id);
        out.push_back(*m);
    }
    return out;
}

SavingReport evaluate_plan(const Region& region, std::span<const LocationModel> models,
                           const DistributionMatrix& plan, double factor, int end_day, double step) {
    if (models.size() != region.size() || plan.rows() != region.size()) {
        throw DomainError("evaluate_plan: models, plan and region disagree in size");
    }
    SavingReport r;
    r.end_day = end_day;
    r.tests_used = plan.total();
    r.unassigned = plan.unassigned;
    for (std::size_t l = 0; l < region.size(); ++l) {
        const LocationModel& m = models[l];
        const double N = m.params.population;
        const double t0 = m.fit.layout.initial().t0;
        if (!(end_day > t0)) throw DomainError("evaluate_plan: end day precedes the simulation start");
        const CompartmentState init = m.fit.initial_state();
        const TestingPolicy policy = plan.policy(l, factor);
        policy.validate(N);
        const CompartmentState none = advance_seir4(m.params, TestingPolicy{}, init, t0, end_day, step);
        const CompartmentState with = advance_seir4(m.params, policy, init, t0, end_day, step);
        r.infections_without += N - none.S;
        r.infections_with += N - with.S;
        r.saved_per_location.push_back(with.S - none.S);
    }
    r.saved = std::accumulate(r.saved_per_location.begin(), r.saved_per_location.end(), 0.0);
    return r;
}

// ---------------------------------------------------------------------------
// Export

void write_plan_csv(std::ostream& os, const Region& region, const DistributionMatrix& plan) {
    os << "day,location_id,location_name,tests\n";
    for (std::size_t j = 0; j < plan.columns(); ++j) {
        const auto date = format_date(region.origin + std::chrono::days{plan.first_day + static_cast<int>(j)});
        for (std::size_t l = 0; l < plan.rows(); ++l) {
            if (plan.d[l][j] == 0) continue;
            const auto& loc = region.locations[l];
            os << date << ',' << loc.id << ',' << loc.name << ',' << plan.d[l][j] << '\n';
        }
    }
}

DistributionMatrix read_plan_csv(std::istream& is, const Region& region, int first_day, int days) {
    DistributionMatrix D(region.size(), static_cast<std::size_t>(days), first_day);
    std::string line;
    if (!std::getline(is, line) || split_csv_line(line) != std::vector<std::string>{"day", "location_id",
                                                                                     "location_name", "tests"}) {
        throw ValidationError("plan CSV: expected header day,location_id,location_name,tests");
    }
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        const std::string where = "plan CSV row " + std::to_string(row);
        if (f.size() != 4) throw ValidationError(where + ": expected 4 fields");
        const int day = static_cast<int>((parse_date(f[0]) - region.origin).count());
        const int j = day - first_day;
        if (j < 0 || j >= days) throw ValidationError(where + ": day " + f[0] + " outside the plan horizon");
        std::size_t l = 0;
        while (l < region.size() && region.locations[l].id != f[1]) ++l;
        if (l == region.size()) throw ValidationError(where + ": unknown location " + f[1]);
        const double tests = parse_number(f[3], where + " tests");
        if (tests < 0 || tests != std::floor(tests)) throw ValidationError(where + ": tests must be a whole number");
        D.d[l][j] += static_cast<long long>(tests);
    }
    return D;
}

void write_saving_report(std::ostream& os, const SavingReport& r, const std::string& title) {
    os << title << '\n';
    os << "  evaluated at day:           " << r.end_day << '\n';
    os << "  infections without testing: " << format_number(r.infections_without) << '\n';
    os << "  infections with plan:       " << format_number(r.infections_with) << '\n';
    os << "  saving:                     " << format_number(r.saved) << '\n';
    os << "  tests used:                 " << r.tests_used << '\n';
    os << "  unassigned tests:           " << r.unassigned << '\n';
}

}  // namespace seirt
