#pragma once

namespace bdsde {

inline constexpr const char* kVersion = "0.1.0";

} // namespace bdsde
