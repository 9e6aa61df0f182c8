#pragma once

#include <iosfwd>

namespace uniap::cli {

// Entry point shared by the `uniap` binary and the acceptance suite.
// Returns the process exit code; errors go to `err` as "error: <Name>: ...".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uniap::cli
