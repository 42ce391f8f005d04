#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "imix/error.hpp"
#include "imix/rng.hpp"

namespace imix {

// Dense row-major matrix of doubles. Vectors are 1 x n.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) throw ShapeError("Tensor: extents must be positive");
    }

    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows * cols != data_.size())
            throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    }

    // Row vector from a list: Tensor{1, 2, 3} is 1x3.
    static Tensor row(std::initializer_list<double> xs) {
        return Tensor(1, xs.size(), std::vector<double>(xs));
    }
    static Tensor row(std::vector<double> xs) {
        const std::size_t n = xs.size();
        return Tensor(1, n, std::move(xs));
    }

    static Tensor randn(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
        Tensor t(rows, cols);
        for (auto& x : t.data_) x = scale * rng.normal();
        return t;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double scalar() const {
        if (!is_scalar()) throw ShapeError("Tensor::scalar on " + shape_str());
        return data_[0];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[" << rows_ << "x" << cols_ << "]";
        return os.str();
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace imix
