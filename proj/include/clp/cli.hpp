#pragma once

namespace clp {

// Entry point of the `clp` tool. Returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace clp
