#include <iostream>

#include "lrsql/cli.hpp"

int main(int argc, char** argv) { return lrsql::run_cli(argc, argv, std::cout, std::cerr); }
