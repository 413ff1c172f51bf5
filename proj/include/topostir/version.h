#pragma once

namespace topostir {
inline constexpr const char* kVersion = "0.1.0";
}
