#include "sphcloud/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sphcloud::cli::run(argc, argv, std::cout, std::cerr); }
