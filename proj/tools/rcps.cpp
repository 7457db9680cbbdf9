#include <iostream>
#include <string>
#include <vector>

#include "rcps/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rcps::cli::run(args, std::cout, std::cerr);
}
