#pragma once

#include <iostream>
#include <string_view>

namespace stegamark::log {

// libtorch bundles its own fmt, which clashes with the system spdlog; plain stderr lines are enough here.
inline void info(std::string_view msg) { std::cerr << "[info] " << msg << '\n'; }
inline void warn(std::string_view msg) { std::cerr << "[warn] " << msg << '\n'; }

}  // namespace stegamark::log
