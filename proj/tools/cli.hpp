#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arplan::cli {

/// Runs the command line in-process. Returns 0 on success, 1 on usage,
/// parse or validation errors, 2 on I/O errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace arplan::cli
