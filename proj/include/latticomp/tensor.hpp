#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace latticomp {

using MultiIndex = std::vector<std::size_t>;

/// Mode sizes of an N-mode tensor (N >= 2). Linearization is row-major: the
/// last mode varies fastest.
class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<std::size_t> dims);
  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

  std::size_t order() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t stride(std::size_t mode) const { return strides_.at(mode); }
  std::uint64_t cell_count() const noexcept { return cells_; }

  bool operator==(const Shape& other) const noexcept { return dims_ == other.dims_; }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::uint64_t cells_ = 0;
};

/// Throws std::out_of_range naming the first offending mode.
void check_index(const Shape& shape, std::span<const std::size_t> index);

std::size_t linearize(const Shape& shape, std::span<const std::size_t> index);
MultiIndex delinearize(const Shape& shape, std::size_t offset);

/// Every cell of `shape` in row-major order.
std::vector<MultiIndex> all_cells(const Shape& shape);

/// Dense row-major N-mode array of finite reals.
class DenseTensor {
 public:
  DenseTensor() = default;
  /// Zero-filled.
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  double at(std::span<const std::size_t> index) const { return values_[linearize(shape_, index)]; }
  double operator[](std::size_t offset) const { return values_[offset]; }

 private:
  Shape shape_;
  std::vector<double> values_;
};

struct Observation {
  MultiIndex index;
  double value = 0.0;
};

/// Sparse set of observed cells. Indices are unique and in bounds, values
/// finite; duplicates are rejected rather than merged.
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(Shape shape, std::vector<Observation> entries);

  /// Every cell of a dense tensor, in row-major order.
  static ObservationSet from_dense(const DenseTensor& tensor);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const Observation> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Observation& operator[](std::size_t i) const { return entries_[i]; }

  bool contains(std::span<const std::size_t> index) const;
  std::vector<MultiIndex> indices() const;
  std::vector<double> values() const;

 private:
  Shape shape_;
  std::vector<Observation> entries_;
  std::vector<std::size_t> sorted_offsets_;
};

struct ObservationSplit {
  ObservationSet train;
  ObservationSet test;
};

/// Partitions `all` into the cells listed in `train_indices` and their
/// complement. Both halves keep the entry order of `all`.
ObservationSplit split_observations(const ObservationSet& all,
                                    std::span<const MultiIndex> train_indices);

}  // namespace latticomp
