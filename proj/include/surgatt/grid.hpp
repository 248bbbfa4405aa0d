#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace surgatt {

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(std::size_t(width) * std::size_t(height), fill)
    {
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int x, int y)
    {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_);
        return data_[std::size_t(y) * std::size_t(width_) + std::size_t(x)];
    }
    const T& operator()(int x, int y) const
    {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_);
        return data_[std::size_t(y) * std::size_t(width_) + std::size_t(x)];
    }

    /// Replicated-border access.
    const T& clamped(int x, int y) const
    {
        return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
    }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Grid& o) const { return width_ == o.width_ && height_ == o.height_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

}  // namespace surgatt
