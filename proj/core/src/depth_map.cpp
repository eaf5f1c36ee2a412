#include "cfield/depth_map.hpp"

#include <algorithm>
#include <cmath>

namespace cfield {

void DepthMap::set(int x, int y, float depth) {
    if (!(depth > 0.0f) || !std::isfinite(depth)) {
        throw DomainError("depth map: values must be positive and finite");
    }
    values_(x, y) = depth;
    valid_(x, y) = 1;
}

std::size_t DepthMap::valid_count() const {
    return static_cast<std::size_t>(std::count_if(valid_.begin(), valid_.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace cfield
