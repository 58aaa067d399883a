#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace udainv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// args excludes the program name: {"train", "--config", "x.cfg", ...}.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace udainv
