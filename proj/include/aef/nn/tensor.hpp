#pragma once

#include <cassert>
#include <cstddef>
#include <new>
#include <numeric>
#include <vector>

namespace aef::nn {

// 64-byte alignment for every buffer Eigen maps. SIMD kernels peel loop
// heads based on the actual address, so run-to-run reproducibility of float
// sums requires stable alignment, not just stable inputs.
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAlloc() = default;
  template <typename U>
  AlignedAlloc(const AlignedAlloc<U>&) {}
  T* allocate(size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAlloc<U>&) const { return true; }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAlloc<T>>;

// Dense row-major tensor. Float for runtime; the templated ops are also
// instantiated in double so gradients can be finite-difference checked at
// tight tolerance.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  AlignedVec<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), T{0});
  }

  size_t numel() const {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
  }
  int dim(size_t i) const { return shape[i]; }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

}  // namespace aef::nn
