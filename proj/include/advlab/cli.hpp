#pragma once

// Command surface of the advlab tool.  Takes argv[1..] and returns the
// process exit code: 0 success, 1 usage error, 2 runtime failure.

#include <string>
#include <vector>

namespace advlab::cli {

int run_cli(std::vector<std::string> args);

}  // namespace advlab::cli
