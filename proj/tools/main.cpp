#include <iostream>

#include "sideguess/cli.hpp"

int main(int argc, char** argv) { return sideguess::run_cli(argc, argv, std::cout, std::cerr); }
