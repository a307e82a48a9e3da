#pragma once

namespace stmom {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stmom
