#include "seirt/data_io.hpp"
#include "seirt/errors.hpp"
#include "seirt/planner.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

using namespace seirt;

namespace {

GainMatrix gains(std::vector<std::vector<double>> g, int first_day = 1) {
    GainMatrix G;
    G.t = first_day - 1;
    G.first_day = first_day;
    G.flagged.assign(g.size(), false);
    G.g = std::move(g);
    return G;
}

// Cell-by-cell rescan of the whole matrix on every round.
std::vector<std::vector<long long>> greedy_oracle(std::vector<std::vector<double>> g, long long total,
                                                  long long cap, const std::vector<double>& pop, double factor,
                                                  const std::vector<long long>& prior) {
    const std::size_t rows = g.size(), cols = g[0].size();
    std::vector<std::vector<long long>> d(rows, std::vector<long long>(cols, 0));
    while (total > 0) {
        double best = 0.0;
        std::size_t bl = rows, bj = cols;
        for (std::size_t l = 0; l < rows; ++l) {
            for (std::size_t j = 0; j < cols; ++j) {
                if (g[l][j] > best) {
                    best = g[l][j];
                    bl = l;
                    bj = j;
                }
            }
        }
        if (bl == rows) break;
        long long col = 0, row = 0;
        for (std::size_t l = 0; l < rows; ++l) col += d[l][bj];
        for (std::size_t j = 0; j < cols; ++j) row += d[bl][j];
        const long long pop_cap = static_cast<long long>(std::floor(pop[bl] / factor)) - prior[bl] - row;
        const long long amount = std::max(0LL, std::min({total, cap - col, pop_cap}));
        d[bl][bj] += amount;
        total -= amount;
        g[bl][bj] = 0.0;
    }
    return d;
}

// Constant-coefficient testing system in (S, E, I, T), fine fixed-step RK4.
struct Oracle {
    double beta, g, rho, sigma, N, factor;

    std::array<double, 4> rhs(const std::array<double, 4>& x, double alpha) const {
        const double y = std::max((1.0 - rho) * x[2] - x[3], 0.0);
        const double inf = beta * x[0] * y / N;
        return {-inf, inf - sigma * x[1], sigma * x[1] - g * x[2], factor * alpha * y / N - g * x[3]};
    }

    std::array<double, 4> run(std::array<double, 4> x, int from, int to, int test_day, double K) const {
        const int n = 200;
        const double h = 1.0 / n;
        for (int day = from; day < to; ++day) {
            const double alpha = day == test_day ? K : 0.0;
            for (int k = 0; k < n; ++k) {
                auto add = [](std::array<double, 4> a, const std::array<double, 4>& b, double s) {
                    for (int c = 0; c < 4; ++c) a[c] += s * b[c];
                    return a;
                };
                const auto k1 = rhs(x, alpha);
                const auto k2 = rhs(add(x, k1, h / 2), alpha);
                const auto k3 = rhs(add(x, k2, h / 2), alpha);
                const auto k4 = rhs(add(x, k3, h), alpha);
                for (int c = 0; c < 4; ++c) x[c] += h / 6 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
            }
        }
        return x;
    }
};

LocationModel constant_model(double beta, double g1, double g2, double rho, double N, int t,
                             const CompartmentState& x) {
    LocationModel m;
    m.params.beta = DecaySchedule::constant(beta);
    m.params.gamma1 = DecaySchedule::constant(g1);
    m.params.gamma2 = DecaySchedule::constant(g2);
    m.params.rho = DecaySchedule::constant(rho);
    m.params.sigma = 0.2;
    m.params.population = N;
    m.state = x;
    m.t = t;
    return m;
}

Region region_of(const std::vector<double>& populations) {
    Region r;
    for (std::size_t l = 0; l < populations.size(); ++l) {
        r.locations.push_back({"L" + std::to_string(l), "Loc " + std::to_string(l), populations[l], {}});
    }
    return r;
}

}  // namespace

TEST_CASE("greedy distribution examples") {
    const std::vector<double> pop{1e6, 1e6};
    const auto none = test_distribution(gains({{5, 3}, {1, 2}}), 0, 2, pop, 1.0);
    CHECK(none.total() == 0);
    CHECK(none.unassigned == 0);

    // Locations as rows: the 5 and the 3 belong to location 0.
    const auto d = test_distribution(gains({{5, 3}, {1, 2}}), 3, 2, pop, 1.0);
    CHECK(d.d == std::vector<std::vector<long long>>{{2, 1}, {0, 0}});
    CHECK(d.unassigned == 0);

    const auto zero = test_distribution(gains({{0, 0}, {0, 0}}), 100000, 10, pop, 1.0);
    CHECK(zero.total() == 0);
    CHECK(zero.unassigned == 100000);

    // Population cap: floor(10 / 3) = 3 tests, one already used elsewhere.
    const std::vector<double> small{10.0, 1e6};
    const std::vector<long long> prior{1, 0};
    const auto capped = test_distribution(gains({{9, 8}, {1, 1}}), 20, 100, small, 3.0, prior);
    CHECK(capped.row_sum(0) == 2);
    CHECK(capped.row_sum(1) == 18);
    CHECK(capped.total() + capped.unassigned == 20);

    const auto ties = test_distribution(gains({{4, 4}, {4, 4}}), 1, 1, pop, 1.0);
    CHECK(ties.d[0][0] == 1);
}

TEST_CASE("greedy distribution equals an exhaustive rescan") {
    std::mt19937_64 rng(51);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t rows = pick(1, 5), cols = pick(1, 5);
        std::vector<std::vector<double>> g(rows, std::vector<double>(cols));
        for (auto& row : g) {
            for (auto& v : row) v = pick(0, 9);
        }
        std::vector<double> pop(rows);
        std::vector<long long> prior(rows);
        for (std::size_t l = 0; l < rows; ++l) {
            pop[l] = pick(1, 40);
            prior[l] = pick(0, 3);
        }
        const double factor = std::array{1.0, 3.0, 9.0}[pick(0, 2)];
        const long long total = pick(0, 40), cap = pick(1, 12);

        const auto d = test_distribution(gains(g), total, cap, pop, factor, prior);
        CHECK(d.d == greedy_oracle(g, total, cap, pop, factor, prior));
        CHECK(d.total() + d.unassigned == total);
        for (std::size_t j = 0; j < cols; ++j) CHECK(d.column_sum(j) <= cap);
    }
}

TEST_CASE("homogeneous plan") {
    CHECK(homogeneous_plan(std::vector<double>{1.0, 1.0}, 100, 1, 5).d ==
          std::vector<std::vector<long long>>{{50}, {50}});
    CHECK(homogeneous_plan(std::vector<double>{3.0, 1.0}, 100, 1, 5).d ==
          std::vector<std::vector<long long>>{{75}, {25}});
    CHECK(homogeneous_plan(std::vector<double>{1.0, 1.0, 1.0}, 100, 1, 5).d ==
          std::vector<std::vector<long long>>{{34}, {33}, {33}});

    const auto spread = homogeneous_plan(std::vector<double>{2e6, 1e6}, 1000, 7, 36);
    CHECK(spread.first_day == 36);
    CHECK(spread.total() == 1000);
    CHECK(spread.row_sum(0) == 667);
    CHECK(spread.d[0][0] == 95);
    CHECK(spread.d[0][6] == 667 - 6 * 95);
    CHECK(homogeneous_plan(std::vector<double>{1.0}, 0, 3, 1).total() == 0);
}

TEST_CASE("capacity rules") {
    const auto a = CapacityRule::parse("absolute:10000");
    CHECK(a.mode == CapacityRule::Mode::absolute_daily_cap);
    CHECK(a.daily_cap(500000) == 10000);
    const auto f = CapacityRule::parse("fraction:0.1");
    CHECK(f.daily_cap(100000) == 10000);
    CHECK(f.daily_cap(15) == 1);
    CHECK(CapacityRule::parse(f.to_string()).value == 0.1);
    CHECK_THROWS_AS(CapacityRule::parse("fraction:1.5"), ValidationError);
    CHECK_THROWS_AS(CapacityRule::parse("absolute:0"), ValidationError);
    CHECK_THROWS_AS(CapacityRule::parse("weekly:5"), ValidationError);
    CHECK_THROWS_AS(CapacityRule::parse("10000"), ValidationError);
}

TEST_CASE("gain matrix against two independent integrations") {
    const double N = 1e6, beta = 0.45, g1 = 0.004, g2 = 0.076, rho = 0.1;
    CompartmentState x;
    x.E = 2000.0;
    x.I = 1500.0;
    x.T = 100.0;
    x.S = N - x.E - x.I;
    const int t = 10;
    std::vector<std::optional<LocationModel>> models{constant_model(beta, g1, g2, rho, N, t, x), std::nullopt};
    const auto region = region_of({N, 5e5});

    GainSettings s;
    s.tests_per_block = 5000;
    s.factor = 3.0;
    s.lookahead = 5;
    s.forecast_lag = 7;
    const auto G = gain_matrix(region, models, t, s);
    REQUIRE(G.rows() == 2);
    REQUIRE(G.columns() == 5);
    CHECK(G.first_day == 11);
    CHECK(G.flagged == std::vector<bool>{false, true});

    const Oracle o{beta, g1 + g2, rho, 0.2, N, 3.0};
    const std::array<double, 4> x0{x.S, x.E, x.I, x.T};
    for (int i = 1; i <= 5; ++i) {
        const int day = t + i;
        const double without = o.run(x0, t, day + 7, -1, 0.0)[0];
        const double with = o.run(x0, t, day + 7, day, 5000.0)[0];
        const double expected = with - without;
        CHECK(expected > 0.0);
        CHECK(G.g[0][i - 1] == doctest::Approx(expected).epsilon(1e-6));
        CHECK(G.g[1][i - 1] == 0.0);
    }

    s.tests_per_block = 0;
    for (const auto& row : gain_matrix(region, models, t, s).g) {
        for (double v : row) CHECK(v == 0.0);
    }
    s.tests_per_block = 5000;
    s.last_day = 13;
    CHECK(gain_matrix(region, models, t, s).columns() == 3);
}

TEST_CASE("no gain while the outbreak is declining") {
    const double N = 1e6;
    CompartmentState x;
    x.E = 500.0;
    x.I = 3000.0;
    x.S = N - x.E - x.I;
    // beta (1 - rho) / gamma = 0.9 * 0.08 / 0.08 < 1 at any S <= N.
    std::vector<std::optional<LocationModel>> models{constant_model(0.08, 0.01, 0.07, 0.1, N, 0, x)};
    GainSettings s;
    s.tests_per_block = 10000;
    const auto G = gain_matrix(region_of({N}), models, 0, s);
    CHECK(G.columns() == 14);
    for (double v : G.g[0]) CHECK(v == 0.0);

    // Same outbreak one step above the threshold.
    models[0] = constant_model(0.12, 0.01, 0.07, 0.1, N, 0, x);
    const auto H = gain_matrix(region_of({N}), models, 0, s);
    for (double v : H.g[0]) CHECK(v > 0.0);
}

TEST_CASE("distribution matrix bookkeeping") {
    DistributionMatrix d(2, 3, 36);
    d.d[0] = {1, 2, 3};
    d.d[1] = {0, 5, 0};
    CHECK(d.total() == 11);
    CHECK(d.column_sum(1) == 7);
    CHECK(d.row_sum(0) == 6);
    const auto p = d.policy(1, 9.0);
    CHECK(p.factor == 9.0);
    CHECK(p.alpha_at(37.5) == 5.0);
    CHECK(p.alpha_at(36.5) == 0.0);
}

TEST_CASE("plan csv round-trip") {
    const auto region = region_of({100.0, 200.0});
    DistributionMatrix d(2, 3, 36);
    d.d[0] = {0, 4, 0};
    d.d[1] = {7, 0, 2};
    std::stringstream ss;
    write_plan_csv(ss, region, d);
    const auto text = ss.str();
    CHECK(text.rfind("day,location_id,location_name,tests\n", 0) == 0);
    std::istringstream in(text);
    CHECK(read_plan_csv(in, region, 36, 3).d == d.d);

    std::istringstream unknown("day,location_id,location_name,tests\n36,ZZ,Nowhere,4\n");
    CHECK_THROWS_AS(read_plan_csv(unknown, region, 36, 3), ValidationError);
    std::istringstream outside("day,location_id,location_name,tests\n50,L0,Loc 0,4\n");
    CHECK_THROWS_AS(read_plan_csv(outside, region, 36, 3), ValidationError);
}

TEST_CASE("plan configuration validation") {
    PlanConfig c;
    c.total_tests = 10;
    CHECK_NOTHROW(c.validate());
    c.evaluation_lag = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.evaluation_lag = 0;
    c.horizon = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.horizon = 5;
    c.factor = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.factor = 1.0;
    c.start = 30;
    CHECK(c.evaluation_day() == 35);
}

TEST_CASE("rolling plan on the synthetic region keeps the budget and the daily cap") {
    const auto synth = synthetic_region();
    EstimationCache cache(EstimationSettings{});
    PlanConfig cfg;
    cfg.total_tests = 60000;
    cfg.cap = CapacityRule::parse("fraction:0.1");
    cfg.factor = 3.0;
    cfg.start = synth.plan_start;
    cfg.horizon = synth.horizon;

    const auto rolled = rolling_plan(synth.region, cfg, cache);
    const auto& plan = rolled.plan;
    CHECK(plan.first_day == cfg.start + 1);
    CHECK(plan.columns() == static_cast<std::size_t>(cfg.horizon));
    CHECK(plan.total() + plan.unassigned == cfg.total_tests);
    for (std::size_t j = 0; j < plan.columns(); ++j) CHECK(plan.column_sum(j) <= 6000);
    for (const auto& row : plan.d) {
        for (long long v : row) CHECK(v >= 0);
    }

    const auto models = simulation_models(synth.region, cfg, cache);
    REQUIRE(models.size() == 3);
    const auto report = evaluate_plan(synth.region, models, plan, cfg.factor, cfg.evaluation_day());
    CHECK(report.saved >= 0.0);
    CHECK(report.tests_used == plan.total());
    CHECK(report.end_day == cfg.evaluation_day());
    double sum = 0.0;
    for (double v : report.saved_per_location) sum += v;
    CHECK(sum == doctest::Approx(report.saved));

    const DistributionMatrix empty(3, static_cast<std::size_t>(cfg.horizon), cfg.start + 1);
    const auto nothing = evaluate_plan(synth.region, models, empty, cfg.factor, cfg.evaluation_day());
    CHECK(nothing.saved == 0.0);
    CHECK(nothing.infections_with == nothing.infections_without);

    // A second pass hits the cache and reproduces the plan exactly.
    const std::size_t fits = cache.fits();
    CHECK(rolling_plan(synth.region, cfg, cache).plan.d == plan.d);
    CHECK(cache.fits() == fits);
}
