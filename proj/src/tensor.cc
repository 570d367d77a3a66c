#include "mprt/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mprt/error.h"

namespace mprt {

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    Require(d > 0, ErrorCode::kShapeMismatch, "non-positive dimension in shape " + ShapeString(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(ShapeSize(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  Require(ShapeSize(shape_) == data_.size(), ErrorCode::kShapeMismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
              ShapeString(shape_));
}

Tensor Tensor::Reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

float Tensor::Min() const {
  Require(!data_.empty(), ErrorCode::kInvalidArgument, "Min of empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

float Tensor::Max() const {
  Require(!data_.empty(), ErrorCode::kInvalidArgument, "Max of empty tensor");
  return *std::max_element(data_.begin(), data_.end());
}

}  // namespace mprt
