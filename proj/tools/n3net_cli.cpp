#include <iostream>
#include <string>
#include <vector>

#include "n3net/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return n3net::run_cli(args, std::cout, std::cerr);
}
