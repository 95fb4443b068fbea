#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vidcascade/frames.hpp"

namespace vidcascade {

/// Feed-forward classifier shape: `hidden_layers` ReLU layers (1 or 2) of
/// widths hidden_width and penultimate_width, then one sigmoid unit.
struct ArchSpec {
  std::uint32_t input_width = 32;
  std::uint32_t input_height = 32;
  std::uint32_t channels = 1;
  std::uint32_t hidden_layers = 1;
  std::uint32_t hidden_width = 16;
  std::uint32_t penultimate_width = 32;

  void validate() const;
  std::size_t input_size() const {
    return std::size_t(input_width) * input_height * channels;
  }
  std::vector<std::uint32_t> layer_widths() const;  // hidden widths then 1
  std::size_t parameter_count() const;
  std::string name() const;  // "L1-C16" or "L2-C16-D32"
  InputDims input_dims() const { return {input_width, input_height}; }
  bool operator==(const ArchSpec&) const = default;
};

struct DenseLayer {
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> biases;   // out

  bool operator==(const DenseLayer&) const = default;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double crossval_loss = 0.0;
  bool operator==(const TrainMeta&) const = default;
};

struct SpecializedModel {
  ArchSpec arch;
  std::vector<DenseLayer> layers;
  TrainMeta train_meta;

  bool operator==(const SpecializedModel&) const = default;
};

struct ThresholdPair {
  double c_low = 0.0;
  double c_high = 1.0;

  void validate() const;
  bool operator==(const ThresholdPair&) const = default;
};

struct TrainHyper {
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  double epsilon = 1e-8;
  int max_epochs = 5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Dense design matrix of preprocessed frames with binary targets.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> x;  // size() * dim
  LabelTrack y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
  void add(std::span<const double> features, std::uint8_t label);
};

SpecializedModel init_model(const ArchSpec& arch, std::uint64_t seed);

/// Confidence that the object is present, in the open interval (0, 1).
double forward(const SpecializedModel& model, std::span<const double> x);
double forward(const SpecializedModel& model, const NormalizedFrame& x);

/// Output-unit pre-activation; forward() is its sigmoid.
double forward_logit(const SpecializedModel& model, std::span<const double> x);

using Gradients = std::vector<DenseLayer>;

/// Exact gradients of the mean binary cross-entropy over `batch` (indices
/// into `data`).
Gradients backward(const SpecializedModel& model, const Dataset& data,
                   std::span<const std::size_t> batch);

double mean_loss(const SpecializedModel& model, const Dataset& data);
double mean_loss(const SpecializedModel& model, const Dataset& data, std::span<const std::size_t> subset);
double accuracy(const SpecializedModel& model, const Dataset& data);

struct EpochRecord {
  double train_loss = 0.0;
  double crossval_loss = 0.0;
};

struct TrainResult {
  SpecializedModel model;  // parameters from the epoch with the lowest cross-val loss
  std::vector<EpochRecord> history;
};

/// RMSprop over shuffled mini-batches. Stops after an epoch whose training
/// loss exceeds the previous epoch's.
TrainResult train(const SpecializedModel& initial, const Dataset& train_set, const Dataset& crossval_set,
                  const TrainHyper& hyper);

enum class Verdict { negative, positive, uncertain };
std::string to_string(Verdict v);

/// c < c_low -> negative, c > c_high -> positive, otherwise uncertain.
Verdict classify(double confidence, const ThresholdPair& t);

/// The default architecture grid over L in {1,2}, C in {8,16,32,64},
/// D in {16,32,64} (D only applies when L = 2): 16 shapes.
std::vector<ArchSpec> default_arch_grid(InputDims input, std::uint32_t channels);

}  // namespace vidcascade
