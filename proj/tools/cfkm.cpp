#include <iostream>

#include "cfkm/commands.hpp"

int main(int argc, char** argv) { return cfkm::run_cli(argc, argv, std::cout, std::cerr); }
