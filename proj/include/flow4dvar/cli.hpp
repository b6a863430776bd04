#pragma once

#include <string>
#include <vector>

namespace flow4dvar {

// Batch front-end. Exit codes: 0 success, 1 usage, 2 validation/config, 3
// solver failure.
int run_cli(std::vector<std::string> args);

}  // namespace flow4dvar
