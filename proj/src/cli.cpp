#include "seirt/cli.hpp"

#include "seirt/analysis.hpp"
#include "seirt/data_io.hpp"
#include "seirt/errors.hpp"
#include "seirt/estimation.hpp"
#include "seirt/integrator.hpp"
#include "seirt/planner.hpp"
#include "seirt/text.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace seirt::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::optional<std::uint64_t> seed;
    double step = kDefaultStep;
    std::string out = ".";
};

struct RegionInput {
    std::string data;
    std::string registry;
    std::optional<double> population_size;
    std::string location_id = "ES";
};

struct EstimationInput {
    std::string rho = "0.1";  // a number or "estimate"
    std::string shape = "constant";
    std::string bounds_file;
    std::size_t population_size = 5;
    std::size_t stale = 1000;
    std::size_t max_generations = 0;
    std::optional<std::size_t> polish;
    double fit_step = 0.25;
    int window = 21;
};

struct PlanInput {
    long long total = 0;
    std::string cap_mode = "absolute:10000";
    double factor = 1.0;
    std::string start;
    int horizon = 0;
    std::optional<long long> block;
    int eval_lag = 14;
    std::string baseline;
    std::string plan_file;
};

std::uint64_t require_seed(const Globals& g) {
    if (!g.seed) throw UsageError("--seed is required for this command");
    return *g.seed;
}

std::ofstream open_output(const Globals& g, const std::string& name) {
    fs::create_directories(g.out);
    const auto path = fs::path(g.out) / name;
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write " + path.string());
    return os;
}

SegmentShape parse_shape(const std::string& s) {
    if (s == "decaying") return SegmentShape::decaying;
    if (s == "constant") return SegmentShape::constant;
    throw ValidationError("--shape must be decaying or constant");
}

std::optional<double> parse_rho(const std::string& s) {
    if (s == "estimate") return std::nullopt;
    const double v = parse_number(s, "--rho");
    if (!(v > 0.0 && v < 1.0)) throw ValidationError("--rho must lie in (0, 1)");
    return v;
}

// key = value lines; '#' starts a comment.
GeneBounds read_bounds(const std::string& path) {
    GeneBounds b;
    if (path.empty()) return b;
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        line = line.substr(0, line.find('#'));
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(path + " line " + std::to_string(row) + ": expected key = value");
        std::string key = line.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        const double v = parse_number(line.substr(eq + 1), path + " " + key);
        if (key == "beta_max") b.beta_max = v;
        else if (key == "decay_rate_max") b.decay_rate_max = v;
        else if (key == "gamma_max") b.gamma_max = v;
        else if (key == "gamma_amplitude_max") b.gamma_amplitude_max = v;
        else if (key == "rho_min") b.rho_min = v;
        else if (key == "rho_max") b.rho_max = v;
        else if (key == "exposed_factor") b.exposed_factor = v;
        else throw ValidationError(path + ": unknown bound '" + key + "'");
    }
    return b;
}

Region load_region(const RegionInput& in) {
    if (in.data.empty()) throw UsageError("--data is required");
    const auto series = load_timeseries(in.data, Schema::detect, in.location_id);
    std::vector<PopulationEntry> registry;
    if (!in.registry.empty()) {
        registry = load_population_registry(in.registry);
    } else if (in.population_size) {
        if (series.size() != 1) throw UsageError("--population-size only applies to single-location data");
        registry.push_back({series[0].location_id, series[0].location_id, *in.population_size});
    } else {
        throw UsageError("either --registry or --population-size is required");
    }
    return build_region(series, registry);
}

int parse_day(const std::string& text, const Region& region) {
    if (text.find('-') != std::string::npos || text.find('/') != std::string::npos) {
        const int year = static_cast<int>(std::chrono::year_month_day{region.origin}.year());
        return static_cast<int>((parse_date(text, year) - region.origin).count());
    }
    const double v = parse_number(text, "day");
    if (v != std::floor(v)) throw ValidationError("day index must be a whole number");
    return static_cast<int>(v);
}

EstimationSettings estimation_settings(const EstimationInput& in, std::uint64_t seed) {
    EstimationSettings s;
    s.fixed_rho = parse_rho(in.rho);
    s.shape = parse_shape(in.shape);
    s.bounds = read_bounds(in.bounds_file);
    s.step = in.fit_step;
    s.window = in.window;
    s.de.population_size = in.population_size;
    s.de.max_stale_generations = in.stale;
    s.de.max_generations = in.max_generations;
    if (in.polish) s.de.polish_evaluations = *in.polish;
    s.de.rng_seed = seed;
    if (!(s.step > 0.0)) throw ValidationError("--fit-step must be positive");
    if (s.window < 2) throw ValidationError("--window must be at least 2 days");
    return s;
}

void add_estimation_options(CLI::App* cmd, EstimationInput& in) {
    cmd->add_option("--rho", in.rho, "Fixed detection rate, or 'estimate'");
    cmd->add_option("--shape", in.shape, "Interval shape: decaying or constant");
    cmd->add_option("--bounds-file", in.bounds_file, "Gene bounds as key = value lines");
    cmd->add_option("--de-population", in.population_size, "Differential evolution population size");
    cmd->add_option("--stale", in.stale, "Stop after this many generations without improvement");
    cmd->add_option("--max-generations", in.max_generations, "Hard generation cap (0: none)");
    cmd->add_option("--polish", in.polish, "Local search evaluations after DE (0: none)");
    cmd->add_option("--fit-step", in.fit_step, "Integrator step used while fitting");
}

void add_region_options(CLI::App* cmd, RegionInput& in) {
    cmd->add_option("--data", in.data, "Cumulative case CSV")->required();
    cmd->add_option("--registry", in.registry, "Population registry CSV");
    cmd->add_option("--population-size", in.population_size, "Population for single-location data");
    cmd->add_option("--location-id", in.location_id, "Id given to single-location data");
}

// ---------------------------------------------------------------------------

struct FitInput {
    RegionInput region;
    EstimationInput est;
    std::string intervals;
    bool weekly = false;
};

int cmd_fit(const FitInput& in, const Globals& g, std::ostream& out) {
    const std::uint64_t seed = require_seed(g);
    if (in.weekly == !in.intervals.empty()) throw UsageError("give exactly one of --intervals and --weekly");
    const Region region = load_region(in.region);
    EstimationSettings settings = estimation_settings(in.est, seed);
    if (!in.est.polish) settings.de.polish_evaluations = DEConfig{}.polish_evaluations;

    std::ofstream report = open_output(g, "fit_report.txt");
    report << "location,intervals,generations,fitness,data_norm\n";
    for (std::size_t l = 0; l < region.size(); ++l) {
        const Location& loc = region.locations[l];
        FitProblem problem;
        problem.observations = loc.observations;
        problem.population = loc.population;
        problem.sigma = settings.sigma;
        problem.fixed_rho = settings.fixed_rho;
        problem.shape = settings.shape;
        problem.bounds = settings.bounds;
        problem.step = settings.step;
        if (in.weekly) {
            problem.breakpoints = periodic_breakpoints(loc.observations.first_day(), loc.observations.last_day());
        } else {
            std::vector<double> starts;
            std::stringstream ss(in.intervals);
            for (std::string item; std::getline(ss, item, ',');) starts.push_back(parse_day(item, region));
            if (starts.size() < 2) throw ValidationError("--intervals needs at least a start and an end date");
            const int last = static_cast<int>(starts.back());
            starts.pop_back();
            problem.observations = loc.observations.up_to(last);
            if (problem.observations.empty()) throw ValidationError("no observations inside --intervals");
            problem.breakpoints = explicit_breakpoints(starts, problem.observations.first_day(), last);
        }

        DEConfig de = settings.de;
        de.rng_seed = derive_seed(seed, l);
        FitResult r = fit(problem, de);
        r.location = loc.id;
        {
            std::ofstream os = open_output(g, "fit_" + loc.id + ".txt");
            write_fit_result(os, r);
        }

        // Observed against fitted series, ready for plotting.
        const auto& obs = problem.observations;
        const ModelParams params = r.model_params();
        const Trajectory traj = simulate_seir4(params, TestingPolicy{}, r.initial_state(), obs.first_day(),
                                               obs.last_day() + (obs.size() == 1 ? 1 : 0), problem.step);
        std::ofstream csv = open_output(g, "fitted_" + loc.id + ".csv");
        csv << "day,date,D_obs,F1_obs,R1_obs,D_fit,F1_fit,R1_fit,S_fit\n";
        for (std::size_t k = 0; k < obs.size(); ++k) {
            const auto& x = traj.at(obs.days[k]);
            csv << obs.days[k] << ',' << format_date(region.origin + std::chrono::days{obs.days[k]}) << ','
                << format_number(obs.detected[k]) << ',' << format_number(obs.deaths[k]) << ','
                << format_number(obs.recovered[k]) << ',' << format_number(x.detected(params.rho(obs.days[k])))
                << ',' << format_number(x.F1) << ',' << format_number(x.R1) << ',' << format_number(x.S) << '\n';
        }

        const double norm = weighted_norm(obs, problem.weights);
        report << loc.id << ',' << problem.breakpoints.size() - 1 << ',' << r.generations << ','
               << format_number(r.fitness) << ',' << format_number(norm) << '\n';
        out << loc.id << ": " << problem.breakpoints.size() - 1 << " intervals, fitness " << format_number(r.fitness)
            << " (" << format_number(100.0 * r.fitness / norm) << "% of the data norm), " << r.generations
            << " generations\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateInput {
    std::string params;
    std::string fixture;
    double rho = 0.1;
    std::optional<double> t0;
    double t1 = 400.0;
    double alpha = 0.0;
    std::string alpha_schedule;
    double factor = 1.0;
};

int cmd_simulate(const SimulateInput& in, const Globals& g, std::ostream& out) {
    if (in.params.empty() == in.fixture.empty()) throw UsageError("give exactly one of --params and --fixture");
    ModelParams params;
    CompartmentState init;
    double t0 = 0.0;
    if (!in.fixture.empty()) {
        if (in.fixture != "spain") throw ValidationError("unknown fixture '" + in.fixture + "'");
        const SpainFixture f = spain_fixture(in.rho);
        params = f.params;
        init = f.initial;
    } else {
        std::ifstream is(in.params);
        if (!is) throw ValidationError("cannot open " + in.params);
        const FitResult r = read_fit_result(is);
        params = r.model_params();
        init = r.initial_state();
        t0 = r.layout.initial().t0;
    }
    if (in.t0) {
        if (*in.t0 < t0) throw ValidationError("--t0 precedes the start of the parameters");
        init = advance_seir4(params, TestingPolicy{}, init, t0, *in.t0, g.step);
        t0 = *in.t0;
    }

    TestingPolicy policy = TestingPolicy::constant(in.alpha, in.factor);
    if (!in.alpha_schedule.empty()) {
        std::ifstream is(in.alpha_schedule);
        if (!is) throw ValidationError("cannot open " + in.alpha_schedule);
        std::string line;
        std::getline(is, line);
        if (split_csv_line(line) != std::vector<std::string>{"day", "tests"}) {
            throw ValidationError(in.alpha_schedule + ": expected header day,tests");
        }
        while (std::getline(is, line)) {
            if (line.empty() || line == "\r") continue;
            const auto f = split_csv_line(line);
            if (f.size() != 2) throw ValidationError(in.alpha_schedule + ": expected 2 fields");
            policy.alpha_per_day[static_cast<long>(parse_number(f[0], "day"))] = parse_number(f[1], "tests");
        }
    }
    policy.validate(params.population);

    const Trajectory traj = simulate_seir4(params, policy, init, t0, in.t1, g.step);
    std::ofstream csv = open_output(g, "trajectory.csv");
    write_trajectory_csv(csv, traj, params.rho);
    const auto& x = traj.final_state();
    out << "t=" << format_number(in.t1) << " S=" << format_number(x.S) << " infected=" << format_number(params.population - x.S)
        << " F1=" << format_number(x.F1) << " R1=" << format_number(x.R1) << " L=" << format_number(x.L) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeInput {
    ConstantParams p{0.0, 0.0, 0.2, 0.0, 0.0, 0.0};
    std::optional<double> S0;
    double R0 = 0.0;
    double T0 = 0.0;
    std::string scan;
    std::string grid;
};

int cmd_analyze(const AnalyzeInput& in, const Globals& g, std::ostream& out) {
    const ConstantParams& p = in.p;
    p.validate();
    const double S0 = in.S0.value_or(p.N - 1.0);
    const StabilityReport st = is_stable(p);
    out << "R0=" << format_number(basic_reproduction_number(p)) << '\n';
    out << "R0_alt=" << format_number(alternative_reproduction_number(p)) << '\n';
    out << "Rt=" << format_number(effective_reproduction_number(p, S0)) << '\n';
    out << "characteristic a2=" << format_number(st.a2) << " a1=" << format_number(st.a1) << " a0=" << format_number(st.a0)
        << '\n';
    out << "verdict=" << (st.stable ? "stable" : "unstable") << '\n';
    out << "S_inf=" << format_number(limit_susceptible(p, S0, in.R0, in.T0)) << '\n';

    if (!in.scan.empty()) {
        ScanParameter which;
        if (in.scan == "alpha") {
            which = ScanParameter::alpha;
        } else if (in.scan == "rho") {
            which = ScanParameter::rho;
        } else {
            throw ValidationError("--scan must be alpha or rho");
        }
        std::vector<double> grid;
        std::stringstream ss(in.grid);
        for (std::string item; std::getline(ss, item, ',');) grid.push_back(parse_number(item, "--grid"));
        if (grid.empty()) throw ValidationError("--scan needs --grid");
        std::ofstream csv = open_output(g, "scan_" + in.scan + ".csv");
        csv << in.scan << ",S_inf\n";
        for (const auto& pt : monotonicity_scan(p, which, grid, S0, in.R0, in.T0)) {
            csv << format_number(pt.value) << ',' << format_number(pt.s_infinity) << '\n';
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct PlanCommandInput {
    RegionInput region;
    EstimationInput est;
    PlanInput plan;
};

PlanConfig plan_config(const PlanInput& in, const Region& region, double step) {
    PlanConfig c;
    c.total_tests = in.total;
    c.cap = CapacityRule::parse(in.cap_mode);
    c.factor = in.factor;
    if (in.start.empty()) throw UsageError("--start is required");
    c.start = parse_day(in.start, region);
    c.horizon = in.horizon;
    c.tests_per_block = in.block;
    c.evaluation_lag = in.eval_lag;
    c.step = step;
    c.validate();
    return c;
}

void report_header(std::ostream& os, const Region& region, const PlanConfig& c, std::uint64_t seed) {
    os << "region: " << region.size() << " locations, day 0 = " << format_date(region.origin) << '\n';
    os << "plan days: " << format_date(region.origin + std::chrono::days{c.start + 1}) << " to "
       << format_date(region.origin + std::chrono::days{c.start + c.horizon}) << '\n';
    os << "total tests: " << c.total_tests << ", cap: " << c.cap.to_string() << ", factor: " << format_number(c.factor)
       << ", seed: " << seed << "\n\n";
}

enum class PlanMode { approach, baseline, evaluate };

int cmd_plan(const PlanCommandInput& in, const Globals& g, std::ostream& out, PlanMode mode) {
    const std::uint64_t seed = require_seed(g);
    const Region region = load_region(in.region);
    const PlanConfig cfg = plan_config(in.plan, region, g.step);
    EstimationCache cache(estimation_settings(in.est, seed));
    const auto models = simulation_models(region, cfg, cache);
    const int end_day = cfg.evaluation_day();

    std::vector<double> populations;
    for (const auto& loc : region.locations) populations.push_back(loc.population);

    std::ofstream report = open_output(g, "report.txt");
    report_header(report, region, cfg, seed);

    auto emit = [&](const DistributionMatrix& plan, const std::string& title, const std::string& csv_name) {
        if (!csv_name.empty()) {
            std::ofstream csv = open_output(g, csv_name);
            write_plan_csv(csv, region, plan);
        }
        const SavingReport r = evaluate_plan(region, models, plan, cfg.factor, end_day, g.step);
        write_saving_report(report, r, title);
        write_saving_report(out, r, title);
        return r;
    };

    if (mode == PlanMode::evaluate) {
        if (in.plan.plan_file.empty()) throw UsageError("--plan is required");
        std::ifstream is(in.plan.plan_file);
        if (!is) throw ValidationError("cannot open " + in.plan.plan_file);
        DistributionMatrix plan = read_plan_csv(is, region, cfg.start + 1, cfg.horizon);
        plan.unassigned = std::max(cfg.total_tests - plan.total(), 0LL);
        emit(plan, "plan " + in.plan.plan_file, "");
        return kExitOk;
    }

    const DistributionMatrix hom = homogeneous_plan(populations, cfg.total_tests, cfg.horizon, cfg.start + 1);
    if (mode == PlanMode::baseline) {
        emit(hom, "homogeneous", "baseline_plan.csv");
        return kExitOk;
    }

    const RollingPlan rp = rolling_plan(region, cfg, cache);
    for (const auto& msg : rp.log) report << "note: " << msg << '\n';
    const SavingReport approach = emit(rp.plan, "approach", "plan.csv");
    if (in.plan.baseline == "homogeneous") {
        const SavingReport base = emit(hom, "homogeneous", "baseline_plan.csv");
        const std::string line = "advantage: " + format_number(approach.saved - base.saved) + '\n';
        report << line;
        out << line;
    } else if (!in.plan.baseline.empty()) {
        throw ValidationError("--baseline must be homogeneous");
    }
    return kExitOk;
}

void add_plan_options(CLI::App* cmd, PlanCommandInput& in, bool budget_required) {
    add_region_options(cmd, in.region);
    add_estimation_options(cmd, in.est);
    auto* total = cmd->add_option("--total", in.plan.total, "Total tests to distribute");
    if (budget_required) total->required();
    cmd->add_option("--cap-mode", in.plan.cap_mode, "absolute:N tests per day or fraction:F of the total");
    cmd->add_option("--factor", in.plan.factor, "Detection multiplier of each test");
    cmd->add_option("--start", in.plan.start, "Last day of known data before the plan (date or day index)")->required();
    cmd->add_option("--horizon", in.plan.horizon, "Number of planned days")->required();
    cmd->add_option("--block", in.plan.block, "Tests per gain block (default: daily cap)");
    cmd->add_option("--eval-lag", in.plan.eval_lag, "Days after the horizon at which savings are measured");
    cmd->add_option("--window", in.est.window, "Days of data per rolling fit");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Epidemic model fitting, simulation and test planning"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Random seed (required by fit, plan, baseline and evaluate)");
    app.add_option("--step", g.step, "Integrator step in days")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output directory");

    FitInput fit_in;
    auto* fit_cmd = app.add_subcommand("fit", "Estimate piecewise parameters per location");
    add_region_options(fit_cmd, fit_in.region);
    add_estimation_options(fit_cmd, fit_in.est);
    fit_cmd->add_option("--intervals", fit_in.intervals, "Interval start dates followed by the end date");
    fit_cmd->add_flag("--weekly", fit_in.weekly, "One interval per week");

    SimulateInput sim_in;
    auto* sim_cmd = app.add_subcommand("simulate", "Integrate the testing model");
    sim_cmd->add_option("--params", sim_in.params, "Fit result file");
    sim_cmd->add_option("--fixture", sim_in.fixture, "Built-in parameter set (spain)");
    sim_cmd->add_option("--rho", sim_in.rho, "Detection rate for the fixture");
    sim_cmd->add_option("--t0", sim_in.t0, "Start day");
    sim_cmd->add_option("--t1", sim_in.t1, "End day");
    sim_cmd->add_option("--alpha", sim_in.alpha, "Constant tests per day");
    sim_cmd->add_option("--alpha-schedule", sim_in.alpha_schedule, "CSV day,tests");
    sim_cmd->add_option("--factor", sim_in.factor, "Detection multiplier of each test");

    AnalyzeInput an_in;
    auto* an_cmd = app.add_subcommand("analyze", "Constant-coefficient threshold and final-size analysis");
    an_cmd->add_option("--beta", an_in.p.beta)->required();
    an_cmd->add_option("--gamma", an_in.p.gamma)->required();
    an_cmd->add_option("--sigma", an_in.p.sigma);
    an_cmd->add_option("--rho", an_in.p.rho);
    an_cmd->add_option("--alpha", an_in.p.alpha, "Tests per day");
    an_cmd->add_option("--N", an_in.p.N, "Population")->required();
    an_cmd->add_option("--S0", an_in.S0, "Initial susceptible (default N - 1)");
    an_cmd->add_option("--R0", an_in.R0, "Initial removed");
    an_cmd->add_option("--T0", an_in.T0, "Initial detected by testing");
    an_cmd->add_option("--scan", an_in.scan, "alpha or rho: write S_inf along --grid");
    an_cmd->add_option("--grid", an_in.grid, "Comma-separated increasing values");

    PlanCommandInput plan_in, base_in, eval_in;
    auto* plan_cmd = app.add_subcommand("plan", "Rolling greedy test distribution and its saving");
    add_plan_options(plan_cmd, plan_in, true);
    plan_cmd->add_option("--baseline", plan_in.plan.baseline, "Also evaluate a baseline (homogeneous)");
    auto* base_cmd = app.add_subcommand("baseline", "Homogeneous distribution and its saving");
    add_plan_options(base_cmd, base_in, true);
    auto* eval_cmd = app.add_subcommand("evaluate", "Saving of a plan CSV");
    add_plan_options(eval_cmd, eval_in, false);
    eval_cmd->add_option("--plan", eval_in.plan.plan_file, "Plan CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitValidation;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_in, g, out);
        if (*sim_cmd) return cmd_simulate(sim_in, g, out);
        if (*an_cmd) return cmd_analyze(an_in, g, out);
        if (*plan_cmd) return cmd_plan(plan_in, g, out, PlanMode::approach);
        if (*base_cmd) return cmd_plan(base_in, g, out, PlanMode::baseline);
        if (*eval_cmd) return cmd_plan(eval_in, g, out, PlanMode::evaluate);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DomainError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const IntegrationError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace seirt::cli
