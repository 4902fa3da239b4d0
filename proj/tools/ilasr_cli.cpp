#include "ilasr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ilasr::cli_main(argc, argv, std::cout, std::cerr); }
