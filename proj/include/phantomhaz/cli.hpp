#pragma once

#include <iosfwd>

namespace phantomhaz {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// phantomhaz <simulate|quantize|fit|phantom|evaluate|report> --config <path> --seed <u64> --out <dir>
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace phantomhaz
