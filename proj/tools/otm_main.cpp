#include <iostream>

#include "otm/cli.hpp"

int main(int argc, char **argv) { return otm::cli::run(argc, argv, std::cout, std::cerr); }
