#include <iostream>
#include <string>
#include <vector>

#include "fairbound/cli.hpp"

int main(int argc, char** argv) {
  return fairbound::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
