#pragma once

namespace statepath {

inline constexpr const char *kVersion = "0.1.0";

}  // namespace statepath
