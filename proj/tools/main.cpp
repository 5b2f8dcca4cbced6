#include <vector>
#include <string>

#include "shapesurv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return shapesurv::run_cli(args);
}
