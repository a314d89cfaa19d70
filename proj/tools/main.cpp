#include <iostream>

#include "scenestat/cli.hpp"

int main(int argc, char** argv) {
  return scenestat::cli::run(argc, argv, std::cout, std::cerr);
}
