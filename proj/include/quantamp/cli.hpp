#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace quantamp {

// Exit codes: 0 ok, 1 internal error, 2 usage/config error, 3 numerical divergence.
int cli_main(int argc, const char* const* argv);
// args exclude the program name
int cli_main(const std::vector<std::string>& args);

// Quick invariant checks; one PASS/FAIL line per check. Returns true when all pass.
bool run_selftest(std::ostream& os);

}  // namespace quantamp
