#pragma once

namespace formmi {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace formmi
