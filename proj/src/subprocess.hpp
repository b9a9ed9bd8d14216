#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace evolve {

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
  std::string err;
};

// Runs argv[0] with the given arguments in `workdir`, capturing stdout and
// stderr. The process group is killed after timeout_s seconds.
CommandResult run_command(const std::vector<std::string>& argv,
                          const std::filesystem::path& workdir, int timeout_s);

// True when `cmd` is an executable path or resolves through PATH.
bool executable_exists(const std::string& cmd);

}  // namespace evolve
