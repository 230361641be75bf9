#include <iostream>

#include "edgecap/cli.hpp"

int main(int argc, char** argv) {
  return edgecap::cli::run(argc, argv, std::cout, std::cerr);
}
