#pragma once

#include <iosfwd>

namespace seirt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;  // bad input data or usage
inline constexpr int kExitNumerical = 3;   // domain or integration failure

/// Entry point of the seirt tool; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace seirt::cli
