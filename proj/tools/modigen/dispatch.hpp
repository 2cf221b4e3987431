// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iostream>

namespace modigen::cli {

/// Runs one command line. Returns 0 on success, 1 on an operational error and 2 on a
/// usage error. Data goes to `out`; help, usage and diagnostics go to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace modigen::cli
