#pragma once

namespace ecfde {

inline constexpr const char* version = "0.1.0";

} // namespace ecfde
