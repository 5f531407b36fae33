#include "ccport/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return ccport::run_cli(argc, argv, std::cout, std::cerr); }
