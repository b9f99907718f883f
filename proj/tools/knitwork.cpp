#include <iostream>

#include "knitwork/cli.hpp"

int main(int argc, char** argv) { return knitwork::run_cli(argc, argv, std::cout, std::cerr); }
