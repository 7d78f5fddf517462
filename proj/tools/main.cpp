#include <string>
#include <vector>

#include "advlab/cli.hpp"

int main(int argc, char** argv) {
  return advlab::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
