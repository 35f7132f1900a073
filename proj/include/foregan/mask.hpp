#pragma once

#include <cstdint>
#include <vector>

#include "foregan/errors.hpp"

namespace foregan {

// Binary H x W image, row-major; 1 = foreground, 0 = background.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    static Mask zeros(int width, int height) {
        Mask m;
        m.width = width;
        m.height = height;
        m.bits.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
        return m;
    }

    std::uint8_t at(int x, int y) const {
        return bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                    static_cast<std::size_t>(x)];
    }
    void set(int x, int y, std::uint8_t v) {
        bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
             static_cast<std::size_t>(x)] = v;
    }

    std::int64_t count_foreground() const {
        std::int64_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }

    bool operator==(const Mask&) const = default;
};

} // namespace foregan
