#include <string>
#include <vector>

#include "sitesel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sitesel::cli::run(args);
}
