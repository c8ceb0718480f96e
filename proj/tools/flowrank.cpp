#include <iostream>

#include "flowrank/cli.hpp"

int main(int argc, char** argv) {
  return flowrank::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
