#pragma once

#include <ostream>
#include <span>
#include <string>

namespace slcnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Environment variable naming the directory relative inputs fall back to.
inline constexpr const char* kDataDirEnv = "SLCNN_DATA_DIR";

// Runs one command line. `args` excludes the program name. JSON results go
// to `out`, logs and errors to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace slcnn::cli
