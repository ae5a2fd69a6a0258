#include "addtree/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return addtree::cli::main(argc, argv, std::cout, std::cerr); }
