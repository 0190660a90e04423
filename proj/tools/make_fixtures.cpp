// Regenerates the CSV files under fixtures/ from the built-in fixture models.
#include "seirt/data_io.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("fixtures");
    fs::create_directories(dir);

    const auto spain = seirt::spain_series(seirt::spain_fixture());
    {
        std::ofstream os(dir / "spain_2020.csv");
        seirt::write_timeseries(os, std::span(&spain, 1), seirt::Schema::single_location);
    }
    const auto synthetic = seirt::synthetic_region();
    {
        std::ofstream os(dir / "synthetic_region.csv");
        seirt::write_timeseries(os, synthetic.series, seirt::Schema::per_location);
    }
    {
        std::ofstream os(dir / "synthetic_population.csv");
        seirt::write_population_registry(os, synthetic.registry);
    }
    std::cout << "wrote fixtures to " << dir << '\n';
    return 0;
}
