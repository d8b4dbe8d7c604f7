#include <iostream>

#include "sgcn/cli/cli.hpp"

int main(int argc, char** argv) { return sgcn::cli::run(argc, argv, std::cout, std::cerr); }
