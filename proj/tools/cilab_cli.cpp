#include <iostream>

#include "cilab/cli.hpp"

int main(int argc, char** argv) {
  return cilab::cli::run_cli(argc, argv, std::cout, std::cerr);
}
