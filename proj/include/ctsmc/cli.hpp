#ifndef CTSMC_CLI_HPP
#define CTSMC_CLI_HPP

#include <string>
#include <vector>

namespace ctsmc::cli {

// Entry point shared by the binary and the in-process CLI tests.
// Exit codes: 0 ok, 2 validation, 3 numeric abort, 4 cap exceeded.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace ctsmc::cli

#endif
