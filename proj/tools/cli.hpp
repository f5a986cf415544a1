#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace d2oc::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

/// Entry point shared by the d2oc binary and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace d2oc::cli
