#include <iostream>

#include "amr/cli.hpp"

int main(int argc, char **argv) { return amr::cli::run(argc, argv, std::cout, std::cerr); }
