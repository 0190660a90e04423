#include "seirt/data_io.hpp"
#include "seirt/errors.hpp"
#include "seirt/text.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace seirt;
using std::chrono::days;
using std::chrono::sys_days;

namespace {

RawSeries make_series(std::vector<double> cases, std::vector<double> deaths) {
    RawSeries s;
    s.location_id = "X";
    for (std::size_t k = 0; k < cases.size(); ++k) {
        s.dates.push_back(sys_days{std::chrono::year{2020} / 3 / 1} + days{static_cast<int>(k)});
        s.filled.push_back(false);
    }
    s.cases = std::move(cases);
    s.deaths = std::move(deaths);
    return s;
}

std::vector<RawSeries> parse(const std::string& text, Schema schema = Schema::detect) {
    std::istringstream is(text);
    return read_timeseries(is, schema);
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("dates and numbers") {
    CHECK(format_date(parse_date("2020-02-20")) == "2020-02-20");
    CHECK(parse_date("12/03/2020") == parse_date("2020-03-12"));
    CHECK(parse_date("1/04", 2020) == parse_date("2020-04-01"));
    CHECK_THROWS_AS(parse_date("1/04"), ValidationError);
    CHECK_THROWS_AS(parse_date("2020-02-30"), ValidationError);
    CHECK_THROWS_AS(parse_date("yesterday"), ValidationError);
    CHECK(format_number(2e6) == "2000000");
    CHECK(format_number(0.1) == "0.1");
    CHECK(parse_number(" 42.5 ", "x") == 42.5);
    CHECK_THROWS_AS(parse_number("4x", "x"), ValidationError);
    CHECK(split_csv_line("a, b ,c\r") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("reading time series") {
    CHECK_THROWS_AS(parse(""), ValidationError);
    CHECK_THROWS_AS(parse("date,location_id,cumulative_cases,cumulative_deaths\n"), ValidationError);

    const auto two = parse("date,location_id,cumulative_cases,cumulative_deaths\n"
                           "2020-03-01,A,10,0\n2020-03-02,A,12,1\n");
    REQUIRE(two.size() == 1);
    CHECK(two[0].size() == 2);
    CHECK(two[0].location_id == "A");
    CHECK(two[0].cases == std::vector<double>{10.0, 12.0});
    CHECK_FALSE(two[0].recovered);

    const auto spain = parse("date,cumulative_cases,cumulative_deaths,cumulative_recovered\n"
                             "2020-02-20,3,0,0\n2020-02-21,4,0,1\n");
    REQUIRE(spain.size() == 1);
    CHECK(spain[0].location_id == "ES");
    CHECK(spain[0].recovered->at(1) == 1.0);
}

TEST_CASE("invalid time series name the offending rows") {
    const auto msg = error_of("date,location_id,cumulative_cases,cumulative_deaths\n"
                              "2020-03-01,A,10,0\n2020-03-02,A,12,0\n2020-03-03,A,11,0\n");
    CHECK(msg.find("offending rows: 4") != std::string::npos);

    CHECK(error_of("date,location_id,cases,cumulative_deaths\n2020-03-01,A,1,0\n").find("unknown column") !=
          std::string::npos);
    CHECK(error_of("date,location_id,cumulative_cases,cumulative_deaths\n2020-03-01,A,1,2\n").find("rows: 2") !=
          std::string::npos);
    CHECK(error_of("date,location_id,cumulative_cases,cumulative_deaths\n2020-03-02,A,1,0\n2020-03-01,A,2,0\n")
              .find("row 3") != std::string::npos);
    CHECK(error_of("date,location_id,cumulative_cases,cumulative_deaths\n2020-03-01,A,1\n").find("row 2") !=
          std::string::npos);
    CHECK(error_of("date,location_id,cumulative_cases,cumulative_deaths\n2020-03-01,A,1,x\n").find("row 2") !=
          std::string::npos);
}

TEST_CASE("gaps and missing values are forward-filled and flagged") {
    const auto s = parse("date,location_id,cumulative_cases,cumulative_deaths\n"
                         "2020-03-01,A,10,1\n2020-03-02,A,,1\n2020-03-05,A,20,2\n")[0];
    REQUIRE(s.size() == 5);
    CHECK(s.cases == std::vector<double>{10, 10, 10, 10, 20});
    CHECK(s.deaths == std::vector<double>{1, 1, 1, 1, 2});
    CHECK(s.filled == std::vector<bool>{false, true, true, true, false});
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("export and reload is lossless") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RawSeries> series;
    for (const char* id : {"A", "B"}) {
        std::vector<double> c{0.0}, f{0.0};
        for (int k = 1; k < 40; ++k) {
            c.push_back(c.back() + std::floor(500.0 * u(rng)));
            f.push_back(std::min(c.back(), f.back() + std::floor(5.0 * u(rng))));
        }
        series.push_back(make_series(c, f));
        series.back().location_id = id;
    }
    std::ostringstream os;
    write_timeseries(os, series, Schema::per_location);
    const auto back = parse(os.str());
    REQUIRE(back.size() == 2);
    for (std::size_t l = 0; l < 2; ++l) {
        CHECK(back[l].location_id == series[l].location_id);
        CHECK(back[l].dates == series[l].dates);
        CHECK(back[l].cases == series[l].cases);
        CHECK(back[l].deaths == series[l].deaths);
    }

    const auto spain = spain_series(spain_fixture());
    std::ostringstream single;
    write_timeseries(single, std::span(&spain, 1), Schema::single_location);
    const auto again = parse(single.str())[0];
    CHECK(again.cases == spain.cases);
    CHECK(*again.recovered == *spain.recovered);
}

TEST_CASE("fourteen-day reconstruction of active and recovered counts") {
    std::vector<double> flat(40, 100.0);
    auto obs = reconstruct_observations(make_series(flat, std::vector<double>(40, 0.0)),
                                        sys_days{std::chrono::year{2020} / 3 / 1});
    for (std::size_t k = 0; k < 14; ++k) CHECK(obs.detected[k] == 100.0);
    for (std::size_t k = 14; k < 40; ++k) CHECK(obs.detected[k] == 0.0);
    CHECK(obs.days.front() == 0);

    std::vector<double> ramp(40, 0.0);
    for (std::size_t k = 10; k < 40; ++k) ramp[k] = 100.0 + 7.0 * (k - 10);
    obs = reconstruct_observations(make_series(ramp, std::vector<double>(40, 0.0)),
                                   sys_days{std::chrono::year{2020} / 3 / 1});
    CHECK(obs.detected[24] == ramp[24] - 100.0);
    CHECK(obs.recovered[24] == 100.0);

    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> c{0.0}, f{0.0};
        for (int k = 1; k < 60; ++k) {
            c.push_back(c.back() + std::floor(300.0 * u(rng)));
            // Deaths only among cases reported at least 14 days earlier.
            const double ceiling = k >= 14 ? c[k - 14] : 0.0;
            f.push_back(std::min(ceiling, f.back() + std::floor(10.0 * u(rng))));
        }
        const auto o = reconstruct_observations(make_series(c, f), sys_days{std::chrono::year{2020} / 3 / 1});
        for (std::size_t k = 0; k < c.size(); ++k) CHECK(o.detected[k] + o.recovered[k] + o.deaths[k] == c[k]);
    }
}

TEST_CASE("population registry") {
    std::istringstream ok("location_id,name,population\nA,Alpha,1000\nB,Beta,2500\n");
    const auto reg = read_population_registry(ok);
    REQUIRE(reg.size() == 2);
    CHECK(reg[1].population == 2500.0);
    std::ostringstream os;
    write_population_registry(os, reg);
    CHECK(os.str() == "location_id,name,population\nA,Alpha,1000\nB,Beta,2500\n");

    std::istringstream dup("location_id,name,population\nA,Alpha,1000\nA,Again,10\n");
    CHECK_THROWS_AS(read_population_registry(dup), ValidationError);
    std::istringstream zero("location_id,name,population\nA,Alpha,0\n");
    CHECK_THROWS_AS(read_population_registry(zero), ValidationError);
    std::istringstream header("id,name,population\nA,Alpha,10\n");
    CHECK_THROWS_AS(read_population_registry(header), ValidationError);
}

TEST_CASE("regions take day 0 from the earliest date") {
    auto a = make_series({1, 2, 3}, {0, 0, 0});
    a.location_id = "A";
    auto b = make_series({5, 6}, {0, 1});
    b.location_id = "B";
    b.dates = {a.dates[1], a.dates[2]};
    const std::vector<RawSeries> series{a, b};
    const std::vector<PopulationEntry> registry{{"B", "Beta", 100.0}, {"A", "Alpha", 50.0}};
    const auto region = build_region(series, registry);
    CHECK(region.origin == a.dates[0]);
    REQUIRE(region.size() == 2);
    CHECK(region.locations[0].id == "B");
    CHECK(region.locations[0].observations.days == std::vector<int>{1, 2});

    const std::vector<PopulationEntry> missing{{"A", "Alpha", 50.0}};
    CHECK_THROWS_AS(build_region(series, missing), ValidationError);
}

TEST_CASE("national fixture") {
    const auto f = spain_fixture();
    CHECK(eval_schedule(f.params.beta, 0.0) == 1.04);
    CHECK(eval_schedule(f.params.gamma1, 10.0) == 0.0069);
    CHECK(eval_schedule(f.params.gamma2, 10.0) == 0.014);
    CHECK(eval_schedule(f.params.beta, 21.0) == doctest::Approx(0.6));
    const auto& segs = f.params.beta.segments();
    REQUIRE(segs.size() == 4);
    CHECK(segs[1].t_start == 21.0);
    CHECK(segs[2].t_start == 41.0);
    CHECK(segs[3].t_start == 61.0);
    CHECK(f.initial.I == doctest::Approx(30.0));
    CHECK(f.initial.E == 160.0);
    CHECK(f.params.population == 47e6);
    CHECK(format_date(f.origin) == "2020-02-20");
    CHECK(format_date(f.origin + days{f.last_day}) == "2020-05-17");
    CHECK(spain_fixture(0.15).initial.I == doctest::Approx(20.0));

    const auto s = spain_series(f);
    CHECK(s.size() == static_cast<std::size_t>(f.last_day + 1));
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("bundled fixture files match the generators") {
    const auto spain = load_timeseries(SEIRT_FIXTURES_DIR "/spain_2020.csv");
    REQUIRE(spain.size() == 1);
    const auto expected = spain_series(spain_fixture());
    CHECK(spain[0].cases == expected.cases);
    CHECK(*spain[0].recovered == *expected.recovered);

    const auto synth = synthetic_region();
    const auto series = load_timeseries(SEIRT_FIXTURES_DIR "/synthetic_region.csv");
    const auto registry = load_population_registry(SEIRT_FIXTURES_DIR "/synthetic_population.csv");
    const auto region = build_region(series, registry);
    REQUIRE(region.size() == synth.region.size());
    for (std::size_t l = 0; l < region.size(); ++l) {
        CHECK(region.locations[l].id == synth.region.locations[l].id);
        CHECK(region.locations[l].population == synth.region.locations[l].population);
        CHECK(region.locations[l].observations.detected == synth.region.locations[l].observations.detected);
    }
    CHECK(region.origin == synth.region.origin);
}
