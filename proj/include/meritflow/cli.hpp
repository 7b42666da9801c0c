#pragma once

#include <string>
#include <vector>

namespace meritflow {

/// Entry point behind the `meritflow` binary. Exit codes: 0 success, 1 usage
/// or input error, 2 numerical failure (divergence / iteration cap) with
/// partial outputs retained.
int cli_main(int argc, const char* const* argv);

/// Convenience overload for in-process invocation.
int cli_main(const std::vector<std::string>& args);

}  // namespace meritflow
