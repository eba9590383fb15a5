#pragma once

namespace her2flex {

// CLI entry point, callable in-process by tests. Returns a process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace her2flex
