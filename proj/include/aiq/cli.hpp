#pragma once

#include <iostream>

namespace aiq {

// Entry point of the `aiq` tool. Errors go to `err` as one JSON line and give
// a nonzero status (1 for failures, 2 for usage).
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                 std::istream& in = std::cin);

}  // namespace aiq
