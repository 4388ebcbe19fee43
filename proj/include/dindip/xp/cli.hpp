#pragma once

#include <iosfwd>

namespace dindip::xp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the dindip tool. Returns 0 on success, 2 on usage or
/// configuration errors and 3 on numerical aborts or divergence.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

const char* version();

}  // namespace dindip::xp
