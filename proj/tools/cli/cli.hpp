#pragma once

#include <string>
#include <vector>

namespace lsp::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Full command-line surface: `args` excludes the program name, e.g.
// {"train", "--data", "d.csv", "--out", "runs/a"}. Returns the process
// exit code (0 ok, 2 config error, 3 data/format error, 4 numeric failure).
int run_cli(const std::vector<std::string>& args);

}  // namespace lsp::cli
