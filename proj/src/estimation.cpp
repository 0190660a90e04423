#include "seirt/estimation.hpp"

#include "seirt/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace seirt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Reference detection rate for the E0 bound when rho is estimated.
constexpr double kReferenceRho = 0.1;

std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ValidationError("fit result: cannot parse number '" + s + "'");
    }
    return v;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// Observations and error

void ObservationSeries::validate() const {
    const auto n = days.size();
    if (detected.size() != n || deaths.size() != n || recovered.size() != n) {
        throw ValidationError("ObservationSeries: column lengths differ");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0 && days[k] <= days[k - 1]) {
            throw ValidationError("ObservationSeries: days must be strictly increasing (index " + std::to_string(k) +
                                  ")");
        }
        if (!(detected[k] >= 0.0 && deaths[k] >= 0.0 && recovered[k] >= 0.0)) {
            throw ValidationError("ObservationSeries: negative value at day " + std::to_string(days[k]));
        }
    }
}

ObservationSeries ObservationSeries::up_to(int day) const {
    ObservationSeries out;
    for (std::size_t k = 0; k < days.size() && days[k] <= day; ++k) {
        out.days.push_back(days[k]);
        out.detected.push_back(detected[k]);
        out.deaths.push_back(deaths[k]);
        out.recovered.push_back(recovered[k]);
    }
    return out;
}

void FitnessWeights::validate() const {
    if (!(a1 >= 0.0 && a2 >= 0.0 && a3 >= 0.0)) throw ValidationError("FitnessWeights: weights must be nonnegative");
    if (std::abs(a1 + a2 + a3 - 1.0) > 1e-12) throw ValidationError("FitnessWeights: weights must sum to 1");
}

double weighted_error(const ObservationSeries& obs, std::span<const double> detected, std::span<const double> deaths,
                      std::span<const double> recovered, const FitnessWeights& w) {
    const auto n = obs.size();
    if (detected.size() != n || deaths.size() != n || recovered.size() != n) {
        throw DomainError("weighted_error: model and observation lengths differ");
    }
    double sd = 0.0, sf = 0.0, sr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sd += (obs.detected[k] - detected[k]) * (obs.detected[k] - detected[k]);
        sf += (obs.deaths[k] - deaths[k]) * (obs.deaths[k] - deaths[k]);
        sr += (obs.recovered[k] - recovered[k]) * (obs.recovered[k] - recovered[k]);
    }
    return w.a1 * std::sqrt(sd) + w.a2 * std::sqrt(sf) + w.a3 * std::sqrt(sr);
}

double weighted_norm(const ObservationSeries& obs, const FitnessWeights& w) {
    const std::vector<double> zeros(obs.size(), 0.0);
    return weighted_error(obs, zeros, zeros, zeros, w);
}

std::optional<ResidualBlocks> window_residuals(const ModelParams& params, const CompartmentState& init,
                                               double t_start, const ObservationSeries& obs, double step) {
    if (obs.empty()) throw DomainError("fitness: no observations");
    if (obs.first_day() < t_start) throw DomainError("fitness: observations precede the start state");
    ResidualBlocks r;
    r.detected.reserve(obs.size());
    r.deaths.reserve(obs.size());
    r.recovered.reserve(obs.size());
    std::size_t k = 0;
    auto accumulate = [&](double t, const StateVector<CompartmentState::size>& x) {
        if (k < obs.size() && t == obs.days[k]) {
            r.detected.push_back(params.rho(t) * x[2] - obs.detected[k]);
            r.deaths.push_back(x[4] - obs.deaths[k]);
            r.recovered.push_back(x[5] - obs.recovered[k]);
            ++k;
        }
        return true;
    };
    try {
        if (obs.last_day() == t_start) {
            accumulate(t_start, init.to_array());
        } else {
            auto rhs = [&](double t, const StateVector<CompartmentState::size>& x) {
                return rhs_seir2(CompartmentState::from_array(x), params, t).to_array();
            };
            march<CompartmentState::size>(rhs, init.to_array(), t_start, obs.last_day(), step, repair_compartments,
                                          accumulate);
        }
    } catch (const IntegrationError&) {
        return std::nullopt;
    } catch (const DomainError&) {
        return std::nullopt;
    }
    if (k != obs.size()) return std::nullopt;
    return r;
}

double ResidualBlocks::combine(const FitnessWeights& w) const {
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };
    const double value = w.a1 * norm(detected) + w.a2 * norm(deaths) + w.a3 * norm(recovered);
    return std::isfinite(value) ? value : kInf;
}

double window_fitness(const ModelParams& params, const CompartmentState& init, double t_start,
                      const ObservationSeries& obs, const FitnessWeights& w, double step) {
    const auto r = window_residuals(params, init, t_start, obs, step);
    return r ? r->combine(w) : kInf;
}

double fitness(const ModelParams& params, const CompartmentState& init, const ObservationSeries& obs,
               const FitnessWeights& w, double step) {
    if (obs.empty()) throw DomainError("fitness: no observations");
    return window_fitness(params, init, obs.first_day(), obs, w, step);
}

// ---------------------------------------------------------------------------
// Gene layout

std::vector<double> ParameterVector::values() const {
    std::vector<double> v;
    v.reserve(genes.size());
    for (const auto& g : genes) v.push_back(g.value);
    return v;
}

const Gene& ParameterVector::find(const std::string& name, int interval) const {
    for (const auto& g : genes) {
        if (g.name == name && g.interval == interval) return g;
    }
    throw ValidationError("ParameterVector: no gene " + name + "[" + std::to_string(interval) + "]");
}

GeneLayout::GeneLayout(std::vector<double> breakpoints, SegmentShape shape, std::optional<double> fixed_rho,
                       double population, double sigma, InitialData initial, GeneBounds bounds)
    : breakpoints_(std::move(breakpoints)),
      shape_(shape),
      fixed_rho_(fixed_rho),
      population_(population),
      sigma_(sigma),
      initial_(initial),
      bounds_(bounds) {
    if (breakpoints_.size() < 2) throw DomainError("GeneLayout: need at least one interval");
    for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
        if (!(breakpoints_[k] > breakpoints_[k - 1])) throw DomainError("GeneLayout: breakpoints must increase");
    }
    if (fixed_rho_ && !(*fixed_rho_ > 0.0 && *fixed_rho_ < 1.0)) throw DomainError("GeneLayout: rho outside (0, 1)");
    if (!(population_ > 0.0)) throw DomainError("GeneLayout: population must be positive");

    auto add = [&](const std::string& name, int interval, double lo, double hi) {
        names_.push_back(name);
        intervals_.push_back(interval);
        lower_.push_back(lo);
        upper_.push_back(hi);
    };
    const auto& b = bounds_;
    for (std::size_t k = 0; k < intervals(); ++k) {
        const int i = static_cast<int>(k);
        add("beta0", i, 0.0, b.beta_max);
        if (shape_ == SegmentShape::decaying) {
            add("beta1", i, 0.0, b.beta_max);
            add("r_beta", i, 0.0, b.decay_rate_max);
        }
        add("gamma1_0", i, 0.0, b.gamma_max);
        if (shape_ == SegmentShape::decaying) {
            add("gamma1_1", i, -b.gamma_amplitude_max, b.gamma_amplitude_max);
            add("r_gamma1", i, 0.0, b.decay_rate_max);
        }
        add("gamma2_0", i, 0.0, b.gamma_max);
        if (shape_ == SegmentShape::decaying) {
            add("gamma2_1", i, -b.gamma_amplitude_max, b.gamma_amplitude_max);
            add("r_gamma2", i, 0.0, b.decay_rate_max);
        }
        if (!fixed_rho_) add("rho", i, b.rho_min, b.rho_max);
    }
    const double rho_ref = fixed_rho_.value_or(kReferenceRho);
    const double infected_ref = std::max(initial_.detected / rho_ref, 1.0);
    add("E0", -1, 0.0, b.exposed_factor * infected_ref);
}

std::size_t GeneLayout::genes_per_interval() const {
    return (shape_ == SegmentShape::decaying ? 9 : 3) + (fixed_rho_ ? 0 : 1);
}

void GeneLayout::repair(std::span<double> genes) const {
    for (std::size_t k = 0; k < genes.size(); ++k) genes[k] = std::clamp(genes[k], lower_[k], upper_[k]);
    if (shape_ != SegmentShape::decaying) return;
    const std::size_t per = genes_per_interval();
    for (std::size_t k = 0; k < intervals(); ++k) {
        double* g = genes.data() + k * per;
        for (std::size_t c = 0; c < 9; c += 3) g[c + 1] = std::min(g[c + 1], g[c]);
    }
}

ModelParams GeneLayout::decode(std::span<const double> genes) const {
    if (genes.size() != dimension()) throw DomainError("GeneLayout: wrong gene count");
    const std::size_t per = genes_per_interval();
    std::vector<DecaySegment> beta, g1, g2, rho;
    beta.reserve(intervals());
    g1.reserve(intervals());
    g2.reserve(intervals());
    for (std::size_t k = 0; k < intervals(); ++k) {
        const double* g = genes.data() + k * per;
        const double t0 = breakpoints_[k];
        const double t1 = breakpoints_[k + 1];
        if (shape_ == SegmentShape::decaying) {
            beta.push_back({g[0], g[1], g[2], t0, t1});
            g1.push_back({g[3], g[4], g[5], t0, t1});
            g2.push_back({g[6], g[7], g[8], t0, t1});
        } else {
            beta.push_back({g[0], 0.0, 0.0, t0, t1});
            g1.push_back({g[1], 0.0, 0.0, t0, t1});
            g2.push_back({g[2], 0.0, 0.0, t0, t1});
        }
        if (!fixed_rho_) rho.push_back({g[per - 1], 0.0, 0.0, t0, t1});
    }
    ModelParams p;
    p.beta = DecaySchedule(std::move(beta));
    p.gamma1 = DecaySchedule(std::move(g1));
    p.gamma2 = DecaySchedule(std::move(g2));
    p.rho = fixed_rho_ ? DecaySchedule::constant(*fixed_rho_, breakpoints_.front()) : DecaySchedule(std::move(rho));
    p.sigma = sigma_;
    p.population = population_;
    return p;
}

CompartmentState GeneLayout::initial_state(std::span<const double> genes) const {
    if (genes.size() != dimension()) throw DomainError("GeneLayout: wrong gene count");
    const double rho0 = fixed_rho_ ? *fixed_rho_ : genes[genes_per_interval() - 1];
    CompartmentState s;
    s.I = initial_.detected / rho0;
    s.E = genes.back();
    s.F1 = initial_.deaths;
    s.R1 = initial_.recovered;
    s.S = population_ - s.E - s.I - s.F1 - s.R1;
    if (s.S < 0.0) throw DomainError("GeneLayout: initial compartments exceed the population");
    return s;
}

ParameterVector GeneLayout::to_parameter_vector(std::span<const double> genes) const {
    ParameterVector pv;
    pv.genes.reserve(genes.size());
    for (std::size_t k = 0; k < genes.size(); ++k) {
        pv.genes.push_back({names_[k], intervals_[k], genes[k], lower_[k], upper_[k]});
    }
    return pv;
}

std::vector<double> periodic_breakpoints(int first_day, int last_day, int period, int min_tail) {
    if (last_day < first_day) throw DomainError("periodic_breakpoints: empty window");
    if (period < 1) throw DomainError("periodic_breakpoints: period must be positive");
    const int end = last_day + 1;
    std::vector<double> bp;
    for (int d = first_day; d < end; d += period) bp.push_back(d);
    if (bp.size() > 1 && end - static_cast<int>(bp.back()) < min_tail) bp.pop_back();
    bp.push_back(end);
    return bp;
}

std::vector<double> explicit_breakpoints(std::vector<double> starts, int first_day, int last_day) {
    if (last_day < first_day) throw DomainError("explicit_breakpoints: empty window");
    std::sort(starts.begin(), starts.end());
    const double end = last_day + 1;
    std::vector<double> bp{static_cast<double>(first_day)};
    for (const double s : starts) {
        if (s > bp.back() && s < end) bp.push_back(s);
    }
    bp.push_back(end);
    return bp;
}

GeneLayout FitProblem::layout() const {
    if (observations.empty()) throw DomainError("fit: empty observations");
    InitialData init{static_cast<double>(observations.first_day()), observations.detected.front(),
                     observations.deaths.front(), observations.recovered.front()};
    return GeneLayout(breakpoints, shape, fixed_rho, population, sigma, init, bounds);
}

// ---------------------------------------------------------------------------
// Differential evolution

std::vector<double> mutate(std::span<const double> x_i, std::span<const double> x_r1, std::span<const double> x_r2,
                           std::span<const double> x_r3, double K, double F) {
    std::vector<double> u(x_i.size());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = x_i[k] + K * (x_r3[k] - x_i[k]) + F * (x_r1[k] - x_r2[k]);
    return u;
}

GenerationResult new_population(const Population& pop, std::mt19937_64& rng, const FitnessFn& fitness_fn,
                                const RepairFn& repair) {
    const std::size_t n = pop.size();
    if (n < 4) throw DomainError("new_population: at least four individuals are required");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    // (0, 1]
    const double K = 1.0 - unit(rng);
    const double F = 1.0 - unit(rng);

    GenerationResult out;
    out.population = pop;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r1, r2, r3;
        do r1 = pick(rng);
        while (r1 == i);
        do r2 = pick(rng);
        while (r2 == i || r2 == r1);
        do r3 = pick(rng);
        while (r3 == i || r3 == r1 || r3 == r2);

        std::vector<double> u = mutate(pop[i].genes, pop[r1].genes, pop[r2].genes, pop[r3].genes, K, F);
        repair(u);
        if (u == pop[i].genes) continue;  // identical descendant cannot be strictly better
        const double fu = fitness_fn(u);
        if (fu < pop[i].fitness) {
            out.population[i] = Individual{std::move(u), fu};
            ++out.replacements;
        }
    }
    return out;
}

namespace {

// Solves A x = b for symmetric positive definite A (row-major n x n).
bool cholesky_solve(std::vector<double> a, std::vector<double>& b, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) return false;
        d = std::sqrt(d);
        a[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = v / d;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * b[k];
        b[i] = v / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double v = b[i];
        for (std::size_t k = i + 1; k < n; ++k) v -= a[k * n + i] * b[k];
        b[i] = v / a[i * n + i];
    }
    return true;
}

}  // namespace

double polish_least_squares(const FitnessFn& f, const ResidualFn& residuals, const RepairFn& repair,
                            std::vector<double>& x, double fx, std::span<const double> lower,
                            std::span<const double> upper, std::size_t max_evaluations) {
    const std::size_t n = x.size();
    if (n == 0 || !std::isfinite(fx)) return fx;
    std::size_t used = 0;
    double lambda = 1e-3;

    std::vector<double> r = residuals(x);
    ++used;
    std::vector<double> jac, jtj(n * n), grad(n), delta(n), trial(n);
    while (!r.empty() && used + n + 1 <= max_evaluations) {
        const std::size_t m = r.size();
        // Forward differences, stepping inward at the upper bound.
        jac.assign(m * n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double range = upper[k] - lower[k];
            if (!(range > 0.0)) continue;
            double h = 1e-7 * std::max(std::abs(x[k]), range);
            if (x[k] + h > upper[k]) h = -h;
            std::vector<double> xh = x;
            xh[k] += h;
            const auto rh = residuals(xh);
            ++used;
            if (rh.size() != m) continue;
            for (std::size_t i = 0; i < m; ++i) jac[i * n + k] = (rh[i] - r[i]) / h;
        }
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = &jac[i * n];
            for (std::size_t p = 0; p < n; ++p) {
                if (row[p] == 0.0) continue;
                grad[p] += row[p] * r[i];
                for (std::size_t q = 0; q <= p; ++q) jtj[p * n + q] += row[p] * row[q];
            }
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = 0; q < p; ++q) jtj[q * n + p] = jtj[p * n + q];
        }

        // Coordinates held at a bound by the gradient stay fixed for this step.
        std::vector<bool> held(n, false);
        for (std::size_t p = 0; p < n; ++p) {
            held[p] = (x[p] <= lower[p] && grad[p] > 0.0) || (x[p] >= upper[p] && grad[p] < 0.0);
        }
        bool improved = false;
        while (!improved && lambda < 1e12 && used < max_evaluations) {
            std::vector<double> a = jtj;
            for (std::size_t p = 0; p < n; ++p) {
                a[p * n + p] += lambda * std::max(jtj[p * n + p], 1e-300) + 1e-300;
                if (!held[p]) continue;
                for (std::size_t q = 0; q < n; ++q) a[p * n + q] = a[q * n + p] = 0.0;
                a[p * n + p] = 1.0;
            }
            for (std::size_t p = 0; p < n; ++p) delta[p] = held[p] ? 0.0 : -grad[p];
            if (!cholesky_solve(std::move(a), delta, n)) {
                lambda *= 10.0;
                continue;
            }
            for (std::size_t p = 0; p < n; ++p) trial[p] = std::clamp(x[p] + delta[p], lower[p], upper[p]);
            repair(trial);
            const double ft = f(trial);
            ++used;
            if (ft < fx) {
                const bool tiny = fx - ft <= 1e-12 * fx;
                x = trial;
                fx = ft;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (tiny) return fx;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
        r = residuals(x);
        ++used;
    }
    return fx;
}

namespace {

// Local least-squares descent from the DE best, then hops: one interval's
// genes are redrawn inside their bounds and the descent rerun, keeping the
// result when it improves. Budget is shared by all descents.
double polish(const GeneLayout& layout, const FitnessFn& f, const ResidualFn& residuals, const RepairFn& repair,
              std::vector<double>& x, double fx, std::size_t budget, std::mt19937_64& rng) {
    std::size_t used = 0;
    std::size_t calls = 0;
    const FitnessFn counted_f = [&](std::span<const double> g) {
        ++calls;
        return f(g);
    };
    const ResidualFn counted_r = [&](std::span<const double> g) {
        ++calls;
        return residuals(g);
    };
    const std::size_t per_descent = std::max<std::size_t>(budget / 20, 50 * (layout.dimension() + 1));
    auto descend = [&](std::vector<double>& g, double fg) {
        calls = 0;
        fg = polish_least_squares(counted_f, counted_r, repair, g, fg, layout.lower(), layout.upper(),
                                  std::min(per_descent, budget - used));
        used += calls;
        return fg;
    };
    const double start = fx;
    fx = descend(x, fx);

    const int groups = static_cast<int>(layout.breakpoints().size());  // intervals plus the initial-state genes
    std::uniform_int_distribution<int> pick(0, groups - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (used + layout.dimension() + 2 < budget && fx > 1e-12 * start) {
        std::vector<double> g = x;
        const int group = pick(rng);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const int iv = layout.interval_of(k);
            if (iv == group || (iv < 0 && group == groups - 1)) {
                g[k] = layout.lower()[k] + unit(rng) * (layout.upper()[k] - layout.lower()[k]);
            }
        }
        repair(g);
        ++used;
        const double fg = f(g);
        if (!std::isfinite(fg)) continue;
        const double fd = descend(g, fg);
        if (fd < fx) {
            fx = fd;
            x = std::move(g);
        }
    }
    return fx;
}

}  // namespace

FitResult fit(const FitProblem& problem, const DEConfig& cfg, const FitHooks& hooks) {
    if (problem.observations.empty()) throw DomainError("fit: empty observations");
    problem.observations.validate();
    problem.weights.validate();
    if (cfg.population_size < 4) throw DomainError("fit: population_size must be at least 4");

    const GeneLayout layout = problem.layout();
    const FitnessFn fitness_fn = [&](std::span<const double> genes) {
        try {
            return fitness(layout.decode(genes), layout.initial_state(genes), problem.observations, problem.weights,
                           problem.step);
        } catch (const DomainError&) {
            return kInf;
        }
    };
    const RepairFn repair = [&](std::span<double> genes) { layout.repair(genes); };
    const ResidualFn residual_fn = [&](std::span<const double> genes) {
        std::vector<double> out;
        try {
            const auto r = window_residuals(layout.decode(genes), layout.initial_state(genes),
                                            problem.observations.first_day(), problem.observations, problem.step);
            if (!r) return out;
            const auto& w = problem.weights;
            for (double e : r->detected) out.push_back(w.a1 * e);
            for (double e : r->deaths) out.push_back(w.a2 * e);
            for (double e : r->recovered) out.push_back(w.a3 * e);
        } catch (const DomainError&) {
            out.clear();
        }
        return out;
    };

    std::mt19937_64 rng(cfg.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Population pop(cfg.population_size);
    for (std::size_t i = 0; i < pop.size(); ++i) {
        auto& genes = pop[i].genes;
        if (i < hooks.initial_guesses.size()) {
            genes = hooks.initial_guesses[i];
            if (genes.size() != layout.dimension()) throw DomainError("fit: initial guess has the wrong gene count");
        } else {
            genes.resize(layout.dimension());
            for (std::size_t k = 0; k < genes.size(); ++k) {
                genes[k] = layout.lower()[k] + unit(rng) * (layout.upper()[k] - layout.lower()[k]);
            }
        }
        repair(genes);
        pop[i].fitness = fitness_fn(genes);
    }
    if (hooks.on_generation) hooks.on_generation(0, pop);

    std::size_t generation = 0;
    std::size_t stale = 0;
    while (stale < cfg.max_stale_generations && (cfg.max_generations == 0 || generation < cfg.max_generations)) {
        auto next = new_population(pop, rng, fitness_fn, repair);
        pop = std::move(next.population);
        ++generation;
        stale = next.replacements == 0 ? stale + 1 : 0;
        if (hooks.on_generation) hooks.on_generation(generation, pop);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.size(); ++i) {
        if (pop[i].fitness < pop[best].fitness) best = i;
    }
    std::vector<double> genes = pop[best].genes;
    double value = pop[best].fitness;
    if (cfg.polish_evaluations > 0) {
        value = polish(layout, fitness_fn, residual_fn, repair, genes, value, cfg.polish_evaluations, rng);
    }

    FitResult r;
    r.layout = layout;
    r.best = layout.to_parameter_vector(genes);
    r.fitness = value;
    r.seed = cfg.rng_seed;
    r.generations = generation;
    return r;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0x9e3779b97f4a7c15ULL));
}

// ---------------------------------------------------------------------------
// Persistence

void write_fit_result(std::ostream& os, const FitResult& r) {
    const auto& L = r.layout;
    const auto& b = L.bounds();
    os << "seirt-fit 1\n";
    os << "location " << r.location << '\n';
    os << "seed " << r.seed << '\n';
    os << "fitness " << format_double(r.fitness) << '\n';
    os << "generations " << r.generations << '\n';
    os << "population " << format_double(L.population()) << '\n';
    os << "sigma " << format_double(L.sigma()) << '\n';
    os << "shape " << (L.shape() == SegmentShape::decaying ? "decaying" : "constant") << '\n';
    if (L.fixed_rho()) {
        os << "rho fixed " << format_double(*L.fixed_rho()) << '\n';
    } else {
        os << "rho estimated\n";
    }
    os << "breakpoints";
    for (const double v : L.breakpoints()) os << ' ' << format_double(v);
    os << '\n';
    const auto& init = L.initial();
    os << "initial " << format_double(init.t0) << ' ' << format_double(init.detected) << ' '
       << format_double(init.deaths) << ' ' << format_double(init.recovered) << '\n';
    os << "bounds " << format_double(b.beta_max) << ' ' << format_double(b.decay_rate_max) << ' '
       << format_double(b.gamma_max) << ' ' << format_double(b.gamma_amplitude_max) << ' ' << format_double(b.rho_min)
       << ' ' << format_double(b.rho_max) << ' ' << format_double(b.exposed_factor) << '\n';
    for (const auto& g : r.best.genes) {
        os << "gene " << g.name << ' ' << g.interval << ' ' << format_double(g.value) << ' ' << format_double(g.lower)
           << ' ' << format_double(g.upper) << '\n';
    }
}

FitResult read_fit_result(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "seirt-fit 1") throw ValidationError("fit result: bad header");

    FitResult r;
    double population = 0.0, sigma = 0.2;
    SegmentShape shape = SegmentShape::decaying;
    std::optional<double> rho;
    std::vector<double> breakpoints;
    InitialData init;
    GeneBounds bounds;
    std::vector<Gene> genes;

    auto words = [](const std::string& s) {
        std::istringstream ss(s);
        std::vector<std::string> out;
        for (std::string w; ss >> w;) out.push_back(w);
        return out;
    };

    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto space = line.find(' ');
        const std::string key = line.substr(0, space);
        const std::string rest = space == std::string::npos ? "" : line.substr(space + 1);
        const auto w = words(rest);
        if (key == "location") {
            r.location = rest;
        } else if (key == "seed" && w.size() == 1) {
            r.seed = std::stoull(w[0]);
        } else if (key == "fitness" && w.size() == 1) {
            r.fitness = parse_double(w[0]);
        } else if (key == "generations" && w.size() == 1) {
            r.generations = std::stoull(w[0]);
        } else if (key == "population" && w.size() == 1) {
            population = parse_double(w[0]);
        } else if (key == "sigma" && w.size() == 1) {
            sigma = parse_double(w[0]);
        } else if (key == "shape" && w.size() == 1) {
            if (w[0] == "decaying") {
                shape = SegmentShape::decaying;
            } else if (w[0] == "constant") {
                shape = SegmentShape::constant;
            } else {
                throw ValidationError("fit result: unknown shape " + w[0]);
            }
        } else if (key == "rho") {
            if (w.size() == 2 && w[0] == "fixed") {
                rho = parse_double(w[1]);
            } else if (!(w.size() == 1 && w[0] == "estimated")) {
                throw ValidationError("fit result: bad rho line");
            }
        } else if (key == "breakpoints") {
            for (const auto& v : w) breakpoints.push_back(parse_double(v));
        } else if (key == "initial" && w.size() == 4) {
            init = {parse_double(w[0]), parse_double(w[1]), parse_double(w[2]), parse_double(w[3])};
        } else if (key == "bounds" && w.size() == 7) {
            bounds = {parse_double(w[0]), parse_double(w[1]), parse_double(w[2]), parse_double(w[3]),
                      parse_double(w[4]), parse_double(w[5]), parse_double(w[6])};
        } else if (key == "gene" && w.size() == 5) {
            genes.push_back({w[0], std::stoi(w[1]), parse_double(w[2]), parse_double(w[3]), parse_double(w[4])});
        } else {
            throw ValidationError("fit result: unrecognised line '" + line + "'");
        }
    }

    r.layout = GeneLayout(breakpoints, shape, rho, population, sigma, init, bounds);
    if (genes.size() != r.layout.dimension()) throw ValidationError("fit result: gene count does not match layout");
    for (std::size_t k = 0; k < genes.size(); ++k) {
        if (genes[k].name != r.layout.name(k) || genes[k].interval != r.layout.interval_of(k)) {
            throw ValidationError("fit result: gene " + genes[k].name + " out of order");
        }
    }
    r.best.genes = std::move(genes);
    return r;
}

}  // namespace seirt
