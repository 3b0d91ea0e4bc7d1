#include <iostream>

#include "aqc/evalcli/cli.hpp"

int main(int argc, char** argv) { return aqc::eval::run_cli(argc, argv, std::cout, std::cerr); }
