#include "latticomp/neural.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "latticomp/rng.hpp"

namespace latticomp {

NeuralTcModel::NeuralTcModel(Shape shape, std::size_t rank, std::vector<std::size_t> hidden_sizes)
    : shape_(std::move(shape)), rank_(rank), hidden_(std::move(hidden_sizes)) {
  if (rank_ == 0) throw std::invalid_argument("neural model rank must be at least 1");
  for (std::size_t h : hidden_) {
    if (h == 0) throw std::invalid_argument("hidden layer sizes must be positive");
  }
  widths_.push_back(shape_.order() * rank_);
  widths_.insert(widths_.end(), hidden_.begin(), hidden_.end());
  widths_.push_back(1);

  std::size_t offset = 0;
  for (std::size_t n = 0; n < shape_.order(); ++n) {
    emb_offsets_.push_back(offset);
    offset += shape_.dim(n) * rank_;
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    weight_offsets_.push_back(offset);
    offset += widths_[l] * widths_[l + 1];
    bias_offsets_.push_back(offset);
    offset += widths_[l + 1];
  }
  params_.assign(offset, 0.0);
}

NeuralTcModel::NeuralTcModel(Shape shape, std::size_t rank, std::vector<std::size_t> hidden_sizes,
                             std::vector<double> parameters)
    : NeuralTcModel(std::move(shape), rank, std::move(hidden_sizes)) {
  if (parameters.size() != params_.size()) {
    throw std::invalid_argument("neural model expects " + std::to_string(params_.size()) + " parameters, got " +
                                std::to_string(parameters.size()));
  }
  for (double p : parameters) {
    if (!std::isfinite(p)) throw std::invalid_argument("non-finite neural model parameter");
  }
  params_ = std::move(parameters);
}

NeuralTcModel NeuralTcModel::random(Shape shape, std::size_t rank, std::vector<std::size_t> hidden_sizes,
                                    std::uint64_t seed) {
  NeuralTcModel model(std::move(shape), rank, std::move(hidden_sizes));
  Rng rng(seed);
  const double emb_scale = 1.0 / std::sqrt(static_cast<double>(rank));
  const std::size_t emb_end = model.layer_count() > 0 ? model.weight_offsets_[0] : model.params_.size();
  for (std::size_t i = 0; i < emb_end; ++i) model.params_[i] = rng.uniform(-0.5, 0.5) * emb_scale;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.layer_in(l)));
    const std::size_t begin = model.weight_offsets_[l];
    const std::size_t end = model.bias_offsets_[l] + model.layer_out(l);
    for (std::size_t i = begin; i < end; ++i) model.params_[i] = rng.uniform(-bound, bound);
  }
  return model;
}

std::vector<unsigned char> NeuralTcModel::decay_mask() const {
  std::vector<unsigned char> mask(params_.size(), 1);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(bias_offsets_[l]), layer_out(l), 0);
  }
  return mask;
}

namespace {

// a[0] is the concatenated embedding input; z[l] is the pre-activation of
// layer l and a[l + 1] its output.
struct ForwardPass {
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
};

void forward(const NeuralTcModel& model, std::span<const std::size_t> index, ForwardPass& pass) {
  const std::size_t layers = model.layer_count();
  pass.z.resize(layers);
  pass.a.resize(layers + 1);
  auto& input = pass.a[0];
  input.resize(model.input_width());
  for (std::size_t n = 0; n < model.shape().order(); ++n) {
    for (std::size_t k = 0; k < model.rank(); ++k) input[n * model.rank() + k] = model.embedding(n, index[n], k);
  }
  const auto params = model.parameters();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = model.layer_in(l);
    const std::size_t out = model.layer_out(l);
    const double* w = params.data() + model.weight_offset(l);
    const double* b = params.data() + model.bias_offset(l);
    auto& z = pass.z[l];
    z.resize(out);
    const auto& prev = pass.a[l];
    for (std::size_t o = 0; o < out; ++o) {
      double sum = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) sum += row[i] * prev[i];
      z[o] = sum;
    }
    auto& next = pass.a[l + 1];
    next.resize(out);
    const bool hidden = l + 1 < layers;
    for (std::size_t o = 0; o < out; ++o) next[o] = hidden ? std::max(z[o], 0.0) : z[o];
  }
}

}  // namespace

double neural_predict(const NeuralTcModel& model, std::span<const std::size_t> index) {
  check_index(model.shape(), index);
  ForwardPass pass;
  forward(model, index, pass);
  return pass.a.back()[0];
}

DenseTensor neural_reconstruct(const NeuralTcModel& model) {
  const Shape& shape = model.shape();
  std::vector<double> values(shape.cell_count());
  ForwardPass pass;
  for (std::size_t offset = 0; offset < values.size(); ++offset) {
    forward(model, delinearize(shape, offset), pass);
    values[offset] = pass.a.back()[0];
  }
  return DenseTensor(shape, std::move(values));
}

std::vector<double> neural_gradient(const NeuralTcModel& model, const ObservationSet& obs,
                                    std::span<const double> loss_grads) {
  if (loss_grads.size() != obs.size()) {
    throw std::invalid_argument("loss gradient count " + std::to_string(loss_grads.size()) +
                                " does not match observation count " + std::to_string(obs.size()));
  }
  if (!(obs.shape() == model.shape())) throw std::invalid_argument("observation shape differs from model shape");

  std::vector<double> grad(model.parameters().size(), 0.0);
  const auto params = model.parameters();
  const std::size_t layers = model.layer_count();
  ForwardPass pass;
  std::vector<double> delta;
  std::vector<double> prev_delta;

  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double g = loss_grads[i];
    if (g == 0.0) continue;
    const auto& idx = obs[i].index;
    forward(model, idx, pass);

    delta.assign(1, g);
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = model.layer_in(l);
      const std::size_t out = model.layer_out(l);
      const double* w = params.data() + model.weight_offset(l);
      double* gw = grad.data() + model.weight_offset(l);
      double* gb = grad.data() + model.bias_offset(l);
      const auto& prev = pass.a[l];
      prev_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        const double* row = w + o * in;
        double* grow = gw + o * in;
        for (std::size_t k = 0; k < in; ++k) {
          grow[k] += d * prev[k];
          prev_delta[k] += d * row[k];
        }
      }
      if (l > 0) {
        // ReLU derivative at the previous layer; the kink counts as inactive.
        const auto& z = pass.z[l - 1];
        for (std::size_t k = 0; k < in; ++k) {
          if (z[k] <= 0.0) prev_delta[k] = 0.0;
        }
      }
      delta.swap(prev_delta);
    }
    for (std::size_t n = 0; n < model.shape().order(); ++n) {
      double* ge = grad.data() + model.embedding_offset(n) + idx[n] * model.rank();
      for (std::size_t k = 0; k < model.rank(); ++k) ge[k] += delta[n * model.rank() + k];
    }
  }
  return grad;
}

}  // namespace latticomp
