#pragma once

#include <string>
#include <vector>

#include "vpreg/field.hpp"

namespace vpreg {

struct GridLayer {
  const Transform* map = nullptr;
  std::string color = "black";
  double width = 1.0;
};

/// Grid-line drawing of 2-D maps: every `stride`-th lattice line of each
/// layer, drawn in order (later layers on top), `scale` pixels per voxel.
/// Output is deterministic for identical inputs.
std::string grid_svg(const std::vector<GridLayer>& layers, int stride = 4, double scale = 8.0);

}  // namespace vpreg
