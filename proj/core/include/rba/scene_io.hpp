#pragma once

#include <string>

#include "rba/scene.hpp"

namespace rba {

// MSEG1 sample container (binary, little-endian):
//   magic "MSEG1" | u8 version=1 | u32 H | u32 W | u32 C | u32 K
//   | f32[C*H*W] features (channel-major, row-major planes) | u8[H*W] labels
void write_scene(const Scene& scene, const std::string& path);
Scene read_scene(const std::string& path);

}  // namespace rba
