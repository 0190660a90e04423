#include "seirt/errors.hpp"
#include "seirt/estimation.hpp"
#include "seirt/integrator.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace seirt;

namespace {

ObservationSeries observe(const ModelParams& p, const CompartmentState& x0, int first, int last) {
    const auto traj = simulate_seir4(p, TestingPolicy{}, x0, first, last);
    ObservationSeries obs;
    for (const auto& s : traj.samples) {
        obs.days.push_back(static_cast<int>(s.t));
        obs.detected.push_back(p.rho(s.t) * s.state.I);
        obs.deaths.push_back(s.state.F1);
        obs.recovered.push_back(s.state.R1);
    }
    return obs;
}

// Two constant intervals over 20 days, rho fixed at 0.1.
struct SmallCase {
    FitProblem problem;
    std::vector<double> truth;
};

SmallCase small_case() {
    const InitialData init{0.0, 30.0, 0.0, 0.0};
    const GeneLayout layout({0.0, 10.0, 20.0}, SegmentShape::constant, 0.1, 1e6, 0.2, init);
    const std::vector<double> truth{0.6, 0.004, 0.05, 0.3, 0.006, 0.07, 800.0};
    SmallCase c;
    c.truth = truth;
    c.problem.observations = observe(layout.decode(truth), layout.initial_state(truth), 0, 19);
    c.problem.breakpoints = {0.0, 10.0, 20.0};
    c.problem.population = 1e6;
    c.problem.fixed_rho = 0.1;
    c.problem.shape = SegmentShape::constant;
    return c;
}

double sphere(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += (v - 1.0) * (v - 1.0);
    return s;
}

}  // namespace

TEST_CASE("error of a single observation") {
    ObservationSeries obs{{0}, {10.0}, {4.0}, {2.0}};
    const std::vector<double> d{13.0}, f{8.0}, r{2.0};
    CHECK(weighted_error(obs, d, f, r, FitnessWeights{}) == doctest::Approx(2.45).epsilon(1e-15));
    CHECK(weighted_norm(obs, FitnessWeights{}) == doctest::Approx(0.35 * 10.0 + 0.35 * 4.0 + 0.3 * 2.0));
    CHECK_THROWS_AS(weighted_error(obs, std::vector<double>{}, f, r, FitnessWeights{}), DomainError);

    CHECK_NOTHROW(FitnessWeights{}.validate());
    CHECK_THROWS_AS((FitnessWeights{0.5, 0.5, 0.5}.validate()), ValidationError);
    CHECK_THROWS_AS((FitnessWeights{1.2, -0.2, 0.0}.validate()), ValidationError);
}

TEST_CASE("fitness vanishes on data generated by the same parameters") {
    const auto c = small_case();
    const auto layout = c.problem.layout();
    const double f = fitness(layout.decode(c.truth), layout.initial_state(c.truth), c.problem.observations,
                             FitnessWeights{});
    CHECK(f <= 1e-9);

    auto perturbed = c.truth;
    perturbed[0] *= 1.01;
    CHECK(fitness(layout.decode(perturbed), layout.initial_state(perturbed), c.problem.observations,
                  FitnessWeights{}) > 1.0);
    CHECK_THROWS_AS(fitness(layout.decode(c.truth), layout.initial_state(c.truth), ObservationSeries{},
                            FitnessWeights{}),
                    DomainError);
}

TEST_CASE("observation series validation") {
    ObservationSeries ok{{0, 1, 3}, {1, 2, 3}, {0, 0, 0}, {0, 0, 1}};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.up_to(1).size() == 2);
    ObservationSeries unordered{{0, 2, 1}, {1, 2, 3}, {0, 0, 0}, {0, 0, 0}};
    CHECK_THROWS_AS(unordered.validate(), ValidationError);
    ObservationSeries ragged{{0, 1}, {1}, {0, 0}, {0, 0}};
    CHECK_THROWS_AS(ragged.validate(), ValidationError);
    ObservationSeries negative{{0}, {-1}, {0}, {0}};
    CHECK_THROWS_AS(negative.validate(), ValidationError);
}

TEST_CASE("breakpoint helpers") {
    const auto weekly = periodic_breakpoints(0, 90);
    CHECK(weekly.size() == 14);
    CHECK(weekly.back() == 91.0);
    CHECK(weekly[1] == 7.0);
    // A two-day tail joins the previous interval.
    const auto merged = periodic_breakpoints(0, 15);
    CHECK(merged == std::vector<double>{0.0, 7.0, 16.0});
    CHECK(periodic_breakpoints(5, 5) == std::vector<double>{5.0, 6.0});
    CHECK(explicit_breakpoints({30.0, 10.0, 99.0}, 0, 59) == std::vector<double>{0.0, 10.0, 30.0, 60.0});
    CHECK_THROWS_AS(periodic_breakpoints(3, 2), DomainError);
}

TEST_CASE("gene layout decodes schedules and the initial state") {
    const InitialData init{0.0, 30.0, 2.0, 5.0};
    const GeneLayout layout({0.0, 10.0, 20.0}, SegmentShape::decaying, std::nullopt, 1e6, 0.2, init);
    CHECK(layout.dimension() == 2 * 10 + 1);
    CHECK(layout.name(0) == "beta0");
    CHECK(layout.name(9) == "rho");
    CHECK(layout.interval_of(layout.dimension() - 1) == -1);
    CHECK(layout.lower()[4] == -0.5);

    std::vector<double> g(layout.dimension(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = 0.5 * (layout.lower()[k] + layout.upper()[k]);
    g[0] = 0.5;
    g[1] = 0.9;  // amplitude above the start value
    layout.repair(g);
    CHECK(g[1] == 0.5);
    g[9] = 0.25;
    g.back() = 300.0;

    const auto p = layout.decode(g);
    CHECK(p.beta(0.0) == 0.5);
    CHECK(p.rho(3.0) == 0.25);
    const auto x = layout.initial_state(g);
    CHECK(x.I == 120.0);
    CHECK(x.E == 300.0);
    CHECK(x.F1 == 2.0);
    CHECK(x.R1 == 5.0);
    CHECK(x.total() == doctest::Approx(1e6));

    const auto pv = layout.to_parameter_vector(g);
    CHECK(pv.find("rho", 0).value == 0.25);
    CHECK_THROWS_AS(pv.find("rho", 7), ValidationError);
    CHECK_THROWS_AS(layout.decode(std::vector<double>(3, 0.0)), DomainError);

    std::vector<double> wild(layout.dimension(), 1e9);
    layout.repair(wild);
    for (std::size_t k = 0; k < wild.size(); ++k) CHECK(wild[k] <= layout.upper()[k]);
}

TEST_CASE("mutation line") {
    const std::vector<double> x1{1.0}, x2{2.0}, x3{3.0}, x4{5.0};
    const auto u = mutate(x1, x2, x4, x3, 0.5, 0.5);
    CHECK(u[0] == 0.5);
}

TEST_CASE("a population of identical individuals stays unchanged") {
    Population pop(5, Individual{{0.3, 0.7}, sphere(std::vector<double>{0.3, 0.7})});
    std::mt19937_64 rng(7);
    const auto next = new_population(pop, rng, sphere, [](std::span<double>) {});
    CHECK(next.replacements == 0);
    for (const auto& ind : next.population) CHECK(ind.genes == pop[0].genes);

    CHECK_THROWS_AS(new_population(Population(3, pop[0]), rng, sphere, [](std::span<double>) {}), DomainError);
}

TEST_CASE("generations never lose the best individual") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    Population pop(6);
    for (auto& ind : pop) {
        ind.genes = {u(rng), u(rng), u(rng)};
        ind.fitness = sphere(ind.genes);
    }
    auto best = [](const Population& p) {
        double b = p[0].fitness;
        for (const auto& ind : p) b = std::min(b, ind.fitness);
        return b;
    };
    const double initial = best(pop);
    double previous = initial;
    for (int g = 0; g < 200; ++g) {
        const auto next = new_population(pop, rng, sphere, [](std::span<double>) {});
        for (std::size_t i = 0; i < pop.size(); ++i) CHECK(next.population[i].fitness <= pop[i].fitness);
        CHECK(best(next.population) <= previous);
        previous = best(next.population);
        pop = next.population;
    }
    CHECK(previous < initial);
}

TEST_CASE("least-squares polish") {
    auto residuals = [](std::span<const double> x) { return std::vector<double>{x[0] - 1.0, 10.0 * (x[1] - 7.0)}; };
    auto f = [&](std::span<const double> x) {
        const auto r = residuals(x);
        return std::hypot(r[0], r[1]);
    };
    const std::vector<double> lower{-5.0, -5.0}, upper{5.0, 5.0};
    std::vector<double> x{0.0, 0.0};
    const double fx = polish_least_squares(f, residuals, [](std::span<double>) {}, x, f(x), lower, upper, 500);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(x[1] == 5.0);
    CHECK(fx == doctest::Approx(20.0));

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    auto bumpy = [](std::span<const double> x) {
        return std::vector<double>{std::sin(3.0 * x[0]) + x[1], x[0] * x[1] - 2.0, std::cos(x[1])};
    };
    auto g = [&](std::span<const double> x) {
        double s = 0.0;
        for (double v : bumpy(x)) s += v * v;
        return std::sqrt(s);
    };
    for (int k = 0; k < 50; ++k) {
        std::vector<double> y{u(rng), u(rng)};
        const double start = g(y);
        const double end = polish_least_squares(g, bumpy, [](std::span<double>) {}, y, start, lower, upper, 200);
        CHECK(end <= start);
        CHECK(end == g(y));
        CHECK(std::abs(y[0]) <= 5.0);
        CHECK(std::abs(y[1]) <= 5.0);
    }
}

TEST_CASE("fit recovers a small constant-rate problem") {
    const auto c = small_case();
    DEConfig cfg;
    cfg.rng_seed = 3;
    cfg.max_stale_generations = 50;
    cfg.polish_evaluations = 3000;
    const auto r = fit(c.problem, cfg);
    const double scale = weighted_norm(c.problem.observations, FitnessWeights{});
    CHECK(r.fitness <= 1e-3 * scale);
    CHECK(r.seed == 3);
    CHECK(r.fitness == doctest::Approx(fitness(r.model_params(), r.initial_state(), c.problem.observations,
                                                 FitnessWeights{})));
    CHECK(r.best.find("beta0", 0).value == doctest::Approx(0.6).epsilon(1e-2));
}

TEST_CASE("fit is deterministic and respects bounds and the stale rule") {
    const auto c = small_case();
    DEConfig cfg;
    cfg.rng_seed = 11;
    cfg.max_stale_generations = 20;
    cfg.polish_evaluations = 0;

    std::vector<double> best_per_generation;
    std::size_t stale = 0, calls = 0;
    Population last;
    const auto layout = c.problem.layout();
    FitHooks hooks;
    hooks.on_generation = [&](std::size_t generation, const Population& pop) {
        CHECK(generation == calls++);
        double b = pop[0].fitness;
        for (const auto& ind : pop) {
            b = std::min(b, ind.fitness);
            for (std::size_t k = 0; k < ind.genes.size(); ++k) {
                CHECK(ind.genes[k] >= layout.lower()[k]);
                CHECK(ind.genes[k] <= layout.upper()[k]);
            }
        }
        if (!last.empty()) {
            bool same = true;
            for (std::size_t i = 0; i < pop.size(); ++i) same = same && pop[i].genes == last[i].genes;
            stale = same ? stale + 1 : 0;
        }
        last = pop;
        best_per_generation.push_back(b);
    };
    const auto a = fit(c.problem, cfg, hooks);
    CHECK(stale == cfg.max_stale_generations);
    CHECK(a.generations + 1 == calls);
    for (std::size_t g = 1; g < best_per_generation.size(); ++g) {
        CHECK(best_per_generation[g] <= best_per_generation[g - 1]);
    }
    CHECK(a.fitness == best_per_generation.back());

    const auto b = fit(c.problem, cfg);
    CHECK(a.best.values() == b.best.values());
    CHECK(a.fitness == b.fitness);
    CHECK(a.generations == b.generations);

    cfg.max_generations = 3;
    CHECK(fit(c.problem, cfg).generations == 3);
    cfg.population_size = 3;
    CHECK_THROWS_AS(fit(c.problem, cfg), DomainError);
    FitProblem empty = c.problem;
    empty.observations = {};
    CHECK_THROWS_AS(fit(empty, DEConfig{}), DomainError);
}

TEST_CASE("initial guesses seed the population") {
    const auto c = small_case();
    DEConfig cfg;
    cfg.max_generations = 1;
    cfg.polish_evaluations = 0;
    FitHooks hooks;
    hooks.initial_guesses = {c.truth};
    const auto r = fit(c.problem, cfg, hooks);
    CHECK(r.fitness <= 1e-9);
    hooks.initial_guesses = {{1.0, 2.0}};
    CHECK_THROWS_AS(fit(c.problem, cfg, hooks), DomainError);
}

TEST_CASE("fit results round-trip exactly") {
    auto c = small_case();
    c.problem.fixed_rho.reset();
    c.problem.shape = SegmentShape::decaying;
    DEConfig cfg;
    cfg.rng_seed = 5;
    cfg.max_generations = 30;
    cfg.polish_evaluations = 0;
    auto r = fit(c.problem, cfg);
    r.location = "NF";

    std::stringstream ss;
    write_fit_result(ss, r);
    const auto back = read_fit_result(ss);
    CHECK(back.location == "NF");
    CHECK(back.best.values() == r.best.values());
    CHECK(back.fitness == r.fitness);
    CHECK(back.seed == 5);
    CHECK(back.generations == r.generations);
    CHECK(back.layout.breakpoints() == r.layout.breakpoints());
    CHECK(back.layout.shape() == SegmentShape::decaying);
    CHECK_FALSE(back.layout.fixed_rho());
    CHECK(back.initial_state().to_array() == r.initial_state().to_array());

    std::istringstream bad("seirt-fit 2\n");
    CHECK_THROWS_AS(read_fit_result(bad), ValidationError);
}

TEST_CASE("derived seeds") {
    CHECK(derive_seed(42, 1) == derive_seed(42, 1));
    CHECK(derive_seed(42, 1) != derive_seed(42, 2));
    CHECK(derive_seed(42, 1, 0) != derive_seed(42, 1, 1));
    CHECK(derive_seed(42, 1) != derive_seed(43, 1));
}
