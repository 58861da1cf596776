#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slcnn/error.hpp"

namespace slcnn {

// rows x cols x channels, row-major with channels innermost:
// element (i, j, c) lives at (i * cols + j) * channels + c.
template <typename T>
class BasicFeatureMap {
 public:
  using value_type = T;

  BasicFeatureMap() = default;
  BasicFeatureMap(std::size_t rows, std::size_t cols, std::size_t channels, T fill = T{0})
      : rows_(rows), cols_(cols), channels_(channels), data_(rows * cols * channels, fill) {
    if (rows == 0 || cols == 0 || channels == 0) {
      throw ShapeError("feature map dimensions must be >= 1");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j, std::size_t c) { return data_[index(i, j, c)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t c) const { return data_[index(i, j, c)]; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t c) const noexcept {
    return (i * cols_ + j) * channels_ + c;
  }

  // The channel vector at (i, j).
  std::span<T> at(std::size_t i, std::size_t j) { return {data_.data() + index(i, j, 0), channels_}; }
  std::span<const T> at(std::size_t i, std::size_t j) const { return {data_.data() + index(i, j, 0), channels_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool same_shape(const BasicFeatureMap& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_ && channels_ == other.channels_;
  }

  bool operator==(const BasicFeatureMap&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t channels_ = 0;
  std::vector<T> data_;
};

using FeatureMap = BasicFeatureMap<float>;

}  // namespace slcnn
