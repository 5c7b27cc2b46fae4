#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlld::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Environment variable that overrides the training seed (a --seed flag wins).
inline constexpr const char* kSeedEnv = "RLLD_SEED";

/// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rlld::cli
