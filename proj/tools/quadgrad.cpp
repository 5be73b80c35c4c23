#include <iostream>

#include "quadgrad/cli.hpp"

int main(int argc, char** argv) { return quadgrad::cli_main(argc, argv, std::cout, std::cerr); }
