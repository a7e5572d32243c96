#include <iostream>

#include "magceptor/cli.hpp"

int main(int argc, char** argv) { return magceptor::run_cli(argc, argv, std::cout, std::cerr); }
