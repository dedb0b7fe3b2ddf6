#pragma once

#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "statenet/errors.hpp"

namespace statenet::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// Dense real array, row-major. Rank is 1 (vectors) or 2 (matrices) everywhere
// in this library; the shape is kept general anyway. All dimensions are
// positive and data.size() == product of dimensions.
template <typename T>
struct Array {
    Shape shape;
    std::vector<T> data;

    Array() = default;

    explicit Array(Shape s) : shape(std::move(s)) {
        check_dims();
        data.assign(shape_numel(shape), T(0));
    }

    Array(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        check_dims();
        if (data.size() != shape_numel(shape))
            throw ShapeError("array data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static Array zeros(Shape s) { return Array(std::move(s)); }

    static Array full(Shape s, T value) {
        Array a(std::move(s));
        for (T& x : a.data) x = value;
        return a;
    }

    static Array vector(std::vector<T> values) {
        Shape s{values.size()};
        return Array(std::move(s), std::move(values));
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    // Matrix element access, row-major.
    T& at(std::size_t row, std::size_t col) { return data[row * shape[1] + col]; }
    const T& at(std::size_t row, std::size_t col) const { return data[row * shape[1] + col]; }

    bool same_shape(const Array& other) const { return shape == other.shape; }

    void fill(T value) {
        for (T& x : data) x = value;
    }

private:
    void check_dims() const {
        if (shape.empty()) throw ShapeError("array shape must have at least one dimension");
        for (std::size_t d : shape)
            if (d == 0) throw ShapeError("array dimensions must be positive, got shape " + shape_str(shape));
    }
};

template <typename T>
void require_same_shape(const Array<T>& a, const Array<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                         " vs " + shape_str(b.shape));
}

} // namespace statenet::ad
