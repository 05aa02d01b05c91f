#pragma once

namespace heatlab {

inline constexpr const char* kArtifactVersion = "1.0.0";

}  // namespace heatlab
