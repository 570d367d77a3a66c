#ifndef MPRT_TENSOR_H_
#define MPRT_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mprt {

using Shape = std::vector<int>;

std::size_t ShapeSize(const Shape& shape);
std::string ShapeString(const Shape& shape);

// Dense row-major float32 array. Images are laid out as [channels, height,
// width]; vectors as [n].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  // Same data, new shape with identical element count.
  Tensor Reshaped(Shape shape) const;

  bool AllFinite() const;
  float Min() const;
  float Max() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<float> data_;
};

}  // namespace mprt

#endif  // MPRT_TENSOR_H_
