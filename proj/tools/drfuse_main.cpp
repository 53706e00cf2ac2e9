#include "drfuse/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return drfuse::run_cli(argc, argv, std::cout, std::cerr); }
