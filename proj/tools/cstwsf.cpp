#include "cstwsf/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return cstwsf::cli::run_cli(argc, argv, std::cout, std::cerr); }
