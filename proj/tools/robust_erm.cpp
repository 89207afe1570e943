#include <iostream>

#include "robust_erm/cli.hpp"

int main(int argc, char** argv) { return robust_erm::cli::run(argc, argv, std::cout, std::cerr); }
