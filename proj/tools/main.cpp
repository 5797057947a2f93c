#include <string>
#include <vector>

#include "fedfuse/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fedfuse::cli::run(args);
}
