#pragma once

#include <string>
#include <vector>

// Subcommand entry points. Each returns a process exit code: 0 success,
// 1 runtime/data error, 2 usage/config error.
namespace spill::cli {

int run(int argc, char** argv);

}  // namespace spill::cli
