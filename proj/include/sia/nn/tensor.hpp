#pragma once

#include <cstddef>
#include <cstdlib>
#include <new>
#include <string>
#include <vector>

namespace sia::nn {

// 64-byte aligned allocator. Heap addresses vary between runs; fixing the
// alignment of every GEMM operand keeps Eigen's kernel dispatch (and so the
// floating-point summation order) identical run to run.
template <typename T>
struct AlignedAlloc {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;

    AlignedAlloc() = default;
    template <typename U>
    AlignedAlloc(const AlignedAlloc<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlign}));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t{kAlign});
    }
    bool operator==(const AlignedAlloc&) const { return true; }
};

using AlignedFloats = std::vector<float, AlignedAlloc<float>>;

// Dense float32 NCHW tensor. Vectors (N x F) are stored as (N, F, 1, 1).
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    AlignedFloats data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.f) {}

    std::size_t size() const { return data.size(); }
    int plane() const { return h * w; }

    float* sample(int i) { return data.data() + static_cast<std::size_t>(i) * c * h * w; }
    const float* sample(int i) const {
        return data.data() + static_cast<std::size_t>(i) * c * h * w;
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

// A named, trainable parameter block. Gradients accumulate across backward
// calls until the optimizer consumes them.
struct Param {
    std::string name;
    std::vector<int> shape;
    AlignedFloats value;
    AlignedFloats grad;
    bool trainable = true;

    explicit Param(std::string n, std::vector<int> s)
        : name(std::move(n)), shape(std::move(s)) {
        std::size_t total = 1;
        for (int d : shape) total *= static_cast<std::size_t>(d);
        value.assign(total, 0.f);
        grad.assign(total, 0.f);
    }
    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.f); }
};

}  // namespace sia::nn
