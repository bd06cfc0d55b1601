#include <iostream>

#include "mmer/cli.hpp"

int main(int argc, char** argv) {
  return mmer::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
