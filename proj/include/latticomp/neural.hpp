#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latticomp/tensor.hpp"

namespace latticomp {

/// Neural tensor completion: per-mode embedding rows are concatenated and fed
/// through a fully connected network (ReLU hidden layers, linear scalar
/// output).
///
/// Parameter layout, flat: embeddings for mode 0..N-1 (each dim_n x rank,
/// row-major), then for every layer its weight matrix (out x in, row-major)
/// followed by its bias vector.
class NeuralTcModel {
 public:
  NeuralTcModel() = default;
  /// All parameters zero.
  NeuralTcModel(Shape shape, std::size_t rank, std::vector<std::size_t> hidden_sizes);
  NeuralTcModel(Shape shape, std::size_t rank, std::vector<std::size_t> hidden_sizes, std::vector<double> parameters);

  /// Embeddings uniform on [-0.5, 0.5] / sqrt(rank); layer weights and biases
  /// uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static NeuralTcModel random(Shape shape, std::size_t rank, std::vector<std::size_t> hidden_sizes,
                              std::uint64_t seed);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return rank_; }
  const std::vector<std::size_t>& hidden_sizes() const noexcept { return hidden_; }
  std::size_t input_width() const noexcept { return shape_.order() * rank_; }
  std::size_t layer_count() const noexcept { return hidden_.size() + 1; }
  std::size_t layer_in(std::size_t layer) const { return widths_.at(layer); }
  std::size_t layer_out(std::size_t layer) const { return widths_.at(layer + 1); }

  double& embedding(std::size_t mode, std::size_t row, std::size_t k) {
    return params_[emb_offsets_[mode] + row * rank_ + k];
  }
  double embedding(std::size_t mode, std::size_t row, std::size_t k) const {
    return params_[emb_offsets_[mode] + row * rank_ + k];
  }
  std::size_t embedding_offset(std::size_t mode) const { return emb_offsets_.at(mode); }
  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const { return bias_offsets_.at(layer); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  /// 1 for parameters subject to weight decay, 0 for layer biases.
  std::vector<unsigned char> decay_mask() const;

 private:
  Shape shape_;
  std::size_t rank_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> emb_offsets_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
  std::vector<double> params_;
};

double neural_predict(const NeuralTcModel& model, std::span<const std::size_t> index);

DenseTensor neural_reconstruct(const NeuralTcModel& model);

/// Backpropagated gradient of sum_i loss_grads[i] * prediction(obs[i]),
/// laid out like NeuralTcModel::parameters().
std::vector<double> neural_gradient(const NeuralTcModel& model, const ObservationSet& obs,
                                    std::span<const double> loss_grads);

}  // namespace latticomp
