#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ensemble/error.hpp"

namespace ensemble::analysis {

/// n points of dimension d, stored row-major.
class PointSet {
public:
    PointSet() = default;

    PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
        if (dim_ == 0)
            throw ValidationError("point set dimension must be positive");
        if (coords_.size() % dim_ != 0)
            throw ValidationError("coordinate count is not a multiple of the dimension");
        for (double c : coords_)
            if (!std::isfinite(c))
                throw ValidationError("point set contains a non-finite coordinate");
    }

    std::size_t size() const noexcept { return dim_ ? coords_.size() / dim_ : 0; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return coords_.empty(); }

    std::span<const double> operator[](std::size_t i) const noexcept {
        return {coords_.data() + i * dim_, dim_};
    }

    const std::vector<double>& coords() const noexcept { return coords_; }

    void push_back(std::span<const double> p) {
        if (dim_ == 0)
            dim_ = p.size();
        if (p.size() != dim_)
            throw ValidationError("point dimension mismatch");
        for (double c : p)
            if (!std::isfinite(c))
                throw ValidationError("point set contains a non-finite coordinate");
        coords_.insert(coords_.end(), p.begin(), p.end());
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace ensemble::analysis
