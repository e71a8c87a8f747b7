#include <iostream>

#include "spectest/cli.hpp"

int main(int argc, char** argv) { return spectest::cli::dispatch(argc, argv, std::cout, std::cerr); }
