#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ofi::cli {

/// Runs the command line `args` (without the program name). Returns the
/// process exit status: 0 iff every declared output was written.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "32,16" or "32-16" into hidden widths. "none" or "" gives no
/// hidden layer.
std::vector<int> parse_widths(const std::string& text);

}  // namespace ofi::cli
