#include <vector>
#include <string>

#include "flow4dvar/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return flow4dvar::run_cli(std::move(args));
}
