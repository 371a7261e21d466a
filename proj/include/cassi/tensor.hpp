#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "cassi/error.hpp"

namespace cassi {

// Dense row-major tensor of doubles with an optional gradient buffer of the
// same shape. Activations normally carry values only; parameters carry both.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;
    std::vector<double> g; // empty unless gradients are tracked

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), v(count(shape), 0.0) {}
    Tensor(std::initializer_list<std::size_t> s)
        : shape(s), v(count(shape), 0.0) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::size_t size() const { return v.size(); }

    std::size_t dim(std::size_t i) const { return shape.at(i); }

    void alloc_grad() { g.assign(v.size(), 0.0); }

    // reinterpret without touching data
    void reshape(std::vector<std::size_t> s) {
        require(count(s) == v.size(), "tensor reshape: element count mismatch");
        shape = std::move(s);
    }
};

} // namespace cassi
