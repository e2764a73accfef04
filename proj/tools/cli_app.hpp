#pragma once

namespace bdice {

// Entry point of the bayesdice executable, separated so tests can drive the
// command line in process. Returns the process exit code.
int cli_main(int argc, const char* const* argv);

}  // namespace bdice
