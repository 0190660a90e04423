#include "seirt/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return seirt::cli::run(argc, argv, std::cout, std::cerr); }
