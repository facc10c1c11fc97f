#include <iostream>
#include <string>
#include <vector>

#include "udparse/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return udparse::cli::Run(args, std::cout, std::cerr);
}
