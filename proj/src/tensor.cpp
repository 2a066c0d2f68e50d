#include "sscformer/tensor.hpp"

#include <cmath>
#include <sstream>

namespace sscformer {

std::string shape_to_string(const Shape &shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) {
            os << 'x';
        }
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape &shape) {
    if (shape.empty()) {
        return 0;
    }
    std::size_t n = 1;
    for (std::size_t extent : shape) {
        n *= extent;
    }
    return n;
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
    for (T v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > rows()) {
        throw DimensionError("row slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") out of range for shape " + shape_to_string(shape_));
    }
    const std::size_t n = cols();
    std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                       data_.begin() + static_cast<std::ptrdiff_t>(end * n));
    return BasicTensor(Shape{end - begin, n}, std::move(out));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
}

template <typename T>
double max_abs_diff(const BasicTensor<T> &a, const BasicTensor<T> &b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("max_abs_diff shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return worst;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template double max_abs_diff(const BasicTensor<float> &, const BasicTensor<float> &);
template double max_abs_diff(const BasicTensor<double> &, const BasicTensor<double> &);

} // namespace sscformer
