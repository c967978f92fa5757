#include <string>
#include <vector>

#include "mrag/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mrag::cli::run(args);
}
