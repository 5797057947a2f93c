#pragma once

#include <string>
#include <vector>

namespace fedfuse::cli {

/// Entry point behind the fedfuse binary; args excludes the program name.
/// Returns the process exit code. All diagnostics go to stderr.
int run(const std::vector<std::string>& args);

}  // namespace fedfuse::cli
