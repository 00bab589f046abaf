#pragma once

#include <string>
#include <vector>

namespace fph::cli {

/// Shortest-round-trip float formatting used by every output file:
/// 17 significant digits, '.' decimal separator.
std::string format_double(double value);

/// Atomic file write (temp file in the same directory, then rename).
void write_file_atomic(const std::string& path, const std::string& content);

/// Run one CLI invocation (args exclude the program name). Returns the
/// process exit code; never throws.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

} // namespace fph::cli
