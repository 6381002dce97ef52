#include <iostream>

#include "pedpred/cli.hpp"

int main(int argc, char** argv) { return pedpred::run_cli(argc, argv, std::cout, std::cerr); }
