#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sinomap {

/// Dense row-major 2-D field of doubles. Serves both as an image
/// (height x width attenuation map) and as a sinogram (n_angles x
/// n_detectors of log-domain line integrals).
class Grid {
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    bool same_shape(const Grid& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_value() const {
        double m = data_.empty() ? 0.0 : data_[0];
        for (double v : data_) m = std::max(m, v);
        return m;
    }

    double min_value() const {
        double m = data_.empty() ? 0.0 : data_[0];
        for (double v : data_) m = std::min(m, v);
        return m;
    }

    bool operator==(const Grid& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using Sinogram = Grid;
using Image = Grid;

inline void require_same_shape(const Grid& a, const Grid& b, const std::string& what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(what + ": shape mismatch (" + std::to_string(a.rows()) +
                                    "x" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                                    ")");
}

inline void require_finite(const Grid& g, const std::string& what) {
    if (!g.all_finite()) throw std::invalid_argument(what + ": non-finite entries");
}

}  // namespace sinomap
