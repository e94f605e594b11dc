#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace granur {

/// Runs the granur command line. args excludes the program name. Returns the
/// process exit status: 0 ok, 2 config, 3 IO, 4 remote embedder, 5 data.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace granur
