#pragma once

namespace optembed {

// Command-line entry point: returns 0 on success, 1 on usage errors, 2 on
// runtime errors (missing prerequisite artifacts, bad inputs, IO failures).
int cli_run(int argc, const char* const* argv);

}  // namespace optembed
