#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace parasent::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,       // bad flags, missing or malformed input
  kNumerical = 3,   // non-finite loss or gradient during training
  kReplayMismatch = 4,
};

// Runs one command. args excludes the program name. Report text goes to out,
// diagnostics to err. Every successful run writes a JSON run manifest.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace parasent::cli
