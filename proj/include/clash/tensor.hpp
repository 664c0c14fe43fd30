#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace clash::ad {

struct Shape {
  std::vector<std::int64_t> d;

  Shape() = default;
  Shape(std::initializer_list<std::int64_t> dims) : d(dims) {}
  explicit Shape(std::vector<std::int64_t> dims) : d(std::move(dims)) {}

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto e : d) n *= e;
    return n;
  }
  int rank() const { return int(d.size()); }
  std::int64_t operator[](int i) const { return d[std::size_t(i)]; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense 64-bit tensor. `node` ties the value to the active tape; -1 marks a
// constant that receives no gradient.
struct Tensor {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  int node = -1;

  Tensor() = default;

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double v);
  static Tensor from(Shape s, std::vector<double> v);

  std::int64_t numel() const { return shape.numel(); }
  double* ptr() { return data->data(); }
  const double* ptr() const { return data->data(); }
  double scalar() const;  // requires numel() == 1
};

}  // namespace clash::ad
