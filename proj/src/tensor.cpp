#include "ltdlab/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ltdlab/error.hpp"

namespace ltd {

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > kMaxRank) {
        throw InvalidShape("invalid shape: rank " + std::to_string(dims_.size()) + " not in [1,4]");
    }
    for (auto d : dims_) {
        if (d == 0) throw InvalidShape("invalid shape: zero extent in " + str());
    }
}

std::size_t Shape::numel() const {
    if (dims_.empty()) return 0;
    std::size_t n = 1;
    for (auto d : dims_) n *= d;
    return n;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << ',';
        os << dims_[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_.numel(), fill) {
    if (shape_.rank() == 0) throw InvalidShape("invalid shape: empty");
    if (!std::isfinite(fill)) throw NumericalError("non-finite fill value");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.rank() == 0) throw InvalidShape("invalid shape: empty");
    if (data_.size() != shape_.numel()) {
        throw InvalidShape("invalid shape: " + shape_.str() + " needs " + std::to_string(shape_.numel()) +
                           " elements, got " + std::to_string(data_.size()));
    }
    require_finite(*this, "tensor data");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw InvalidShape(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

void require_finite(const Tensor& t, const char* what) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite element");
    }
}

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
    require_same_shape(a, b, "elementwise");
    Tensor out(a.shape());
    auto x = a.data();
    auto y = b.data();
    auto z = out.data();
    switch (op) {
        case ElementwiseOp::Add:
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
            break;
        case ElementwiseOp::Sub:
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
            break;
        case ElementwiseOp::Mul:
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
            break;
    }
    require_finite(out, "elementwise");
    return out;
}

Tensor scale(const Tensor& a, double k) {
    Tensor out(a.shape());
    auto x = a.data();
    auto z = out.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = k * x[i];
    require_finite(out, "scale");
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out(a.shape());
    auto x = a.data();
    auto z = out.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + c;
    require_finite(out, "add_scalar");
    return out;
}

double reduce_mean(const Tensor& a) {
    double sum = 0.0;
    for (double v : a.data()) sum += v;
    return sum / static_cast<double>(a.numel());
}

}  // namespace ltd
