#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rre {

/// Entry point for the `rre` command line tool. Returns the process exit
/// code (0 success, 2 usage or validation failure, 3 numerical failure).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rre
