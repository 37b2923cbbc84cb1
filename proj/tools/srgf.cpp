#include <iostream>

#include "srgf/evalcli.hpp"

int main(int argc, char** argv) { return srgf::cli::run(argc, argv, std::cout, std::cerr); }
