#include <iostream>

#include "qroute/cli.hpp"

int main(int argc, char** argv) { return qroute::run_cli(argc, argv, std::cout, std::cerr); }
