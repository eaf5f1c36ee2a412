#pragma once

#include <cstddef>
#include <cstdint>

#include "cfield/grid.hpp"

namespace cfield {

// Camera-frame z-depth per pixel with an explicit validity mask. Valid
// values are positive and finite.
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height) : values_(width, height, 0.0f), valid_(width, height, 0) {}

    int width() const { return values_.width(); }
    int height() const { return values_.height(); }

    bool valid(int x, int y) const { return valid_(x, y) != 0; }
    float at(int x, int y) const { return values_(x, y); }

    // Throws DomainError for nonpositive or non-finite depth.
    void set(int x, int y, float depth);
    void invalidate(int x, int y) {
        values_(x, y) = 0.0f;
        valid_(x, y) = 0;
    }

    std::size_t valid_count() const;

    const Grid<float>& values() const { return values_; }
    const Grid<std::uint8_t>& validity() const { return valid_; }

    bool operator==(const DepthMap&) const = default;

private:
    Grid<float> values_;
    Grid<std::uint8_t> valid_;
};

}  // namespace cfield
