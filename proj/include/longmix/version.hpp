#pragma once

namespace longmix {
inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kFitSchemaVersion = 1;
}  // namespace longmix
