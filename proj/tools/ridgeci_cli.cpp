#include "ridgeci/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ridgeci::run_cli(argc, argv, std::cout, std::cerr); }
