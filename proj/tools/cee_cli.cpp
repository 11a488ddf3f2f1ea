#include <iostream>

#include "cee/harness/cli.hpp"

int main(int argc, char** argv) { return cee::harness::cli_main(argc, argv, std::cout, std::cerr); }
