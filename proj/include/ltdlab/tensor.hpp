#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ltd {

inline constexpr std::size_t kMaxRank = 4;

/// Ordered list of positive extents, rank 1 to 4. Validated on construction.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims);
    explicit Shape(std::vector<std::size_t> dims);

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_[i]; }
    std::size_t numel() const;
    std::span<const std::size_t> dims() const { return dims_; }

    bool operator==(const Shape&) const = default;
    std::string str() const;

private:
    std::vector<std::size_t> dims_;
};

/// Dense row-major tensor of doubles (last dim fastest).
///
/// Elements are kept finite: every constructor and arithmetic helper that
/// could introduce NaN/Inf checks its result and throws NumericalError.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.rank(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t numel() const { return data_.size(); }

    std::span<const double> data() const& { return data_; }
    std::span<double> data() & { return data_; }
    // A view into a temporary would dangle.
    std::span<const double> data() && = delete;
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    // Rank-4 (F,H,W,C) and rank-3 (F,H,W) indexing; no bounds checks.
    double at(std::size_t f, std::size_t h, std::size_t w, std::size_t c) const {
        return data_[((f * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
    }
    double& at(std::size_t f, std::size_t h, std::size_t w, std::size_t c) {
        return data_[((f * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
    }
    double at(std::size_t f, std::size_t h, std::size_t w) const {
        return data_[(f * shape_[1] + h) * shape_[2] + w];
    }
    double& at(std::size_t f, std::size_t h, std::size_t w) {
        return data_[(f * shape_[1] + h) * shape_[2] + w];
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

enum class ElementwiseOp { Add, Sub, Mul };

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::Add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::Sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::Mul); }

Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double c);

/// Mean with a fixed left-to-right summation order.
double reduce_mean(const Tensor& a);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_finite(const Tensor& t, const char* what);

}  // namespace ltd
