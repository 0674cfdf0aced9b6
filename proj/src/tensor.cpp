#include "latticomp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace latticomp {

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) {
    throw std::invalid_argument("shape needs at least 2 modes, got " + std::to_string(dims_.size()));
  }
  std::uint64_t cells = 1;
  for (std::size_t n = 0; n < dims_.size(); ++n) {
    if (dims_[n] == 0) {
      throw std::invalid_argument("mode " + std::to_string(n) + " has size 0");
    }
    if (cells > std::numeric_limits<std::uint64_t>::max() / dims_[n]) {
      throw std::invalid_argument("shape cell count overflows 64 bits");
    }
    cells *= dims_[n];
  }
  cells_ = cells;
  strides_.assign(dims_.size(), 1);
  for (std::size_t n = dims_.size() - 1; n > 0; --n) strides_[n - 1] = strides_[n] * dims_[n];
}

void check_index(const Shape& shape, std::span<const std::size_t> index) {
  if (index.size() != shape.order()) {
    throw std::out_of_range("index has " + std::to_string(index.size()) + " components, shape has " +
                            std::to_string(shape.order()) + " modes");
  }
  for (std::size_t n = 0; n < index.size(); ++n) {
    if (index[n] >= shape.dim(n)) {
      throw std::out_of_range("index component " + std::to_string(index[n]) + " out of bounds for mode " +
                              std::to_string(n) + " of size " + std::to_string(shape.dim(n)));
    }
  }
}

std::size_t linearize(const Shape& shape, std::span<const std::size_t> index) {
  check_index(shape, index);
  std::size_t offset = 0;
  for (std::size_t n = 0; n < index.size(); ++n) offset += index[n] * shape.stride(n);
  return offset;
}

MultiIndex delinearize(const Shape& shape, std::size_t offset) {
  if (offset >= shape.cell_count()) {
    throw std::out_of_range("offset " + std::to_string(offset) + " out of bounds for " +
                            std::to_string(shape.cell_count()) + " cells");
  }
  MultiIndex index(shape.order());
  for (std::size_t n = 0; n < shape.order(); ++n) {
    index[n] = offset / shape.stride(n);
    offset %= shape.stride(n);
  }
  return index;
}

std::vector<MultiIndex> all_cells(const Shape& shape) {
  std::vector<MultiIndex> cells;
  cells.reserve(shape.cell_count());
  for (std::size_t offset = 0; offset < shape.cell_count(); ++offset) cells.push_back(delinearize(shape, offset));
  return cells;
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)), values_(shape_.cell_count(), 0.0) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_.cell_count()) {
    throw std::invalid_argument("tensor has " + std::to_string(values_.size()) + " values, shape needs " +
                                std::to_string(shape_.cell_count()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::invalid_argument("non-finite tensor value at offset " + std::to_string(i));
    }
  }
}

ObservationSet::ObservationSet(Shape shape, std::vector<Observation> entries)
    : shape_(std::move(shape)), entries_(std::move(entries)) {
  sorted_offsets_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!std::isfinite(e.value)) {
      throw std::invalid_argument("non-finite observation value at entry " + std::to_string(i));
    }
    sorted_offsets_.push_back(linearize(shape_, e.index));
  }
  std::sort(sorted_offsets_.begin(), sorted_offsets_.end());
  const auto dup = std::adjacent_find(sorted_offsets_.begin(), sorted_offsets_.end());
  if (dup != sorted_offsets_.end()) {
    throw std::invalid_argument("duplicate observation at cell offset " + std::to_string(*dup));
  }
}

ObservationSet ObservationSet::from_dense(const DenseTensor& tensor) {
  std::vector<Observation> entries;
  entries.reserve(tensor.size());
  for (std::size_t offset = 0; offset < tensor.size(); ++offset) {
    entries.push_back({delinearize(tensor.shape(), offset), tensor[offset]});
  }
  return ObservationSet(tensor.shape(), std::move(entries));
}

bool ObservationSet::contains(std::span<const std::size_t> index) const {
  return std::binary_search(sorted_offsets_.begin(), sorted_offsets_.end(), linearize(shape_, index));
}

std::vector<MultiIndex> ObservationSet::indices() const {
  std::vector<MultiIndex> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.index);
  return out;
}

std::vector<double> ObservationSet::values() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value);
  return out;
}

ObservationSplit split_observations(const ObservationSet& all, std::span<const MultiIndex> train_indices) {
  std::vector<std::size_t> train_offsets;
  train_offsets.reserve(train_indices.size());
  for (const auto& idx : train_indices) {
    if (!all.contains(idx)) {
      throw std::invalid_argument("train index at offset " + std::to_string(linearize(all.shape(), idx)) +
                                  " is not an observed cell");
    }
    train_offsets.push_back(linearize(all.shape(), idx));
  }
  std::sort(train_offsets.begin(), train_offsets.end());

  std::vector<Observation> train;
  std::vector<Observation> test;
  for (const auto& e : all.entries()) {
    const auto offset = linearize(all.shape(), e.index);
    if (std::binary_search(train_offsets.begin(), train_offsets.end(), offset)) {
      train.push_back(e);
    } else {
      test.push_back(e);
    }
  }
  return {ObservationSet(all.shape(), std::move(train)), ObservationSet(all.shape(), std::move(test))};
}

}  // namespace latticomp
