#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace comir {

/// Parses `args` (without the program name), runs the command and returns
/// the exit code: 0 success, 2 configuration error, 3 stage failure.
/// Diagnostics go to `err`, results such as `validate` echoes to `out`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace comir
