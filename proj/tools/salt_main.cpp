#include <iostream>
#include <string>
#include <vector>

#include "salt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return salt::cli::run(args, std::cout, std::cerr);
}
