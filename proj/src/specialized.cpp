#include "vidcascade/specialized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vidcascade/diff_detect.hpp"
#include "vidcascade/error.hpp"
#include "vidcascade/rng.hpp"

namespace vidcascade {

namespace {

// Largest double below 1 and smallest normal double: keeps forward() in (0, 1)
// even when the logistic saturates in floating point.
const double kConfMax = std::nextafter(1.0, 0.0);
const double kConfMin = std::numeric_limits<double>::min();

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Activations of every layer for one input; acts[0] is the input copy.
struct Trace {
  std::vector<std::vector<double>> acts;
};

void run_layers(const SpecializedModel& m, std::span<const double> x, Trace& tr) {
  tr.acts.resize(m.layers.size() + 1);
  tr.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const DenseLayer& L = m.layers[l];
    const auto& in = tr.acts[l];
    auto& out = tr.acts[l + 1];
    out.resize(L.out);
    for (std::uint32_t o = 0; o < L.out; ++o) {
      const double* w = L.weights.data() + std::size_t(o) * L.in;
      double s = L.biases[o];
      for (std::uint32_t i = 0; i < L.in; ++i) s += w[i] * in[i];
      const bool hidden = l + 1 < m.layers.size();
      out[o] = hidden ? std::max(0.0, s) : s;
    }
  }
}

Gradients zero_like(const SpecializedModel& m) {
  Gradients g = m.layers;
  for (auto& L : g) {
    std::fill(L.weights.begin(), L.weights.end(), 0.0);
    std::fill(L.biases.begin(), L.biases.end(), 0.0);
  }
  return g;
}

}  // namespace

void ArchSpec::validate() const {
  require(input_width >= 1 && input_height >= 1, "input dims must be >= 1");
  require(channels == 1 || channels == 3, "channels must be 1 or 3");
  require(hidden_layers == 1 || hidden_layers == 2, "hidden_layers must be 1 or 2");
  require(hidden_width >= 1, "hidden_width must be >= 1");
  require(hidden_layers == 1 || penultimate_width >= 1, "penultimate_width must be >= 1");
}

std::vector<std::uint32_t> ArchSpec::layer_widths() const {
  std::vector<std::uint32_t> w{hidden_width};
  if (hidden_layers == 2) w.push_back(penultimate_width);
  w.push_back(1);
  return w;
}

std::size_t ArchSpec::parameter_count() const {
  std::size_t in = input_size(), total = 0;
  for (std::uint32_t out : layer_widths()) {
    total += (in + 1) * out;
    in = out;
  }
  return total;
}

std::string ArchSpec::name() const {
  std::string s = "L" + std::to_string(hidden_layers) + "-C" + std::to_string(hidden_width);
  if (hidden_layers == 2) s += "-D" + std::to_string(penultimate_width);
  return s;
}

void ThresholdPair::validate() const {
  require(c_low >= 0.0 && c_low <= 1.0 && c_high >= 0.0 && c_high <= 1.0,
          "thresholds must lie in [0, 1]");
  require(c_low <= c_high, "c_low must be <= c_high");
}

void TrainHyper::validate() const {
  require(learning_rate > 0 && rmsprop_decay > 0 && rmsprop_decay < 1 && epsilon > 0,
          "learning_rate, rmsprop_decay and epsilon must be positive (decay < 1)");
  require(max_epochs >= 1 && max_epochs <= 5, "max_epochs must be in [1, 5]");
  require(batch_size >= 1, "batch_size must be >= 1");
}

void Dataset::add(std::span<const double> features, std::uint8_t label) {
  if (y.empty() && dim == 0) dim = features.size();
  require(features.size() == dim, "dataset row has the wrong dimension");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(label);
}

SpecializedModel init_model(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  SpecializedModel m;
  m.arch = arch;
  m.train_meta.seed = seed;
  Rng rng(seed);
  std::uint32_t in = static_cast<std::uint32_t>(arch.input_size());
  for (std::uint32_t out : arch.layer_widths()) {
    DenseLayer L;
    L.in = in;
    L.out = out;
    L.weights.resize(std::size_t(in) * out);
    L.biases.assign(out, 0.0);
    // He-uniform: zero mean, variance 2 / fan_in.
    const double limit = std::sqrt(6.0 / double(in));
    for (double& w : L.weights) w = rng.uniform(-limit, limit);
    m.layers.push_back(std::move(L));
    in = out;
  }
  return m;
}

double forward_logit(const SpecializedModel& model, std::span<const double> x) {
  require(x.size() == model.arch.input_size(), "input does not match the model's input dims");
  thread_local Trace tr;
  run_layers(model, x, tr);
  return tr.acts.back()[0];
}

double forward(const SpecializedModel& model, std::span<const double> x) {
  return std::clamp(sigmoid(forward_logit(model, x)), kConfMin, kConfMax);
}

double forward(const SpecializedModel& model, const NormalizedFrame& x) { return forward(model, x.values); }

Gradients backward(const SpecializedModel& model, const Dataset& data, std::span<const std::size_t> batch) {
  if (batch.empty()) fail(ErrorKind::validation, "backward needs a nonempty batch");
  require(data.dim == model.arch.input_size(), "dataset dim does not match the model");
  Gradients g = zero_like(model);
  Trace tr;
  std::vector<double> delta, prev_delta;
  const double scale = 1.0 / double(batch.size());
  for (std::size_t idx : batch) {
    run_layers(model, data.row(idx), tr);
    const double y = data.y[idx] ? 1.0 : 0.0;
    delta.assign(1, (sigmoid(tr.acts.back()[0]) - y) * scale);
    for (std::size_t l = model.layers.size(); l-- > 0;) {
      const DenseLayer& L = model.layers[l];
      DenseLayer& G = g[l];
      const auto& in = tr.acts[l];
      for (std::uint32_t o = 0; o < L.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* gw = G.weights.data() + std::size_t(o) * L.in;
        for (std::uint32_t i = 0; i < L.in; ++i) gw[i] += d * in[i];
        G.biases[o] += d;
      }
      if (l == 0) break;
      prev_delta.assign(L.in, 0.0);
      for (std::uint32_t o = 0; o < L.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = L.weights.data() + std::size_t(o) * L.in;
        for (std::uint32_t i = 0; i < L.in; ++i) prev_delta[i] += d * w[i];
      }
      // ReLU derivative on the layer below (activation > 0 <=> pre-activation > 0).
      for (std::uint32_t i = 0; i < L.in; ++i)
        if (in[i] <= 0.0) prev_delta[i] = 0.0;
      delta.swap(prev_delta);
    }
  }
  return g;
}

double mean_loss(const SpecializedModel& model, const Dataset& data, std::span<const std::size_t> subset) {
  require(!subset.empty(), "loss over an empty set");
  double total = 0.0;
  for (std::size_t i : subset) {
    const double z = forward_logit(model, data.row(i));
    total += softplus(z) - (data.y[i] ? z : 0.0);
  }
  return total / double(subset.size());
}

double mean_loss(const SpecializedModel& model, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return mean_loss(model, data, all);
}

double accuracy(const SpecializedModel& model, const Dataset& data) {
  require(data.size() > 0, "accuracy over an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    hit += (forward(model, data.row(i)) > 0.5) == (data.y[i] != 0) ? 1 : 0;
  return double(hit) / double(data.size());
}

TrainResult train(const SpecializedModel& initial, const Dataset& train_set, const Dataset& crossval_set,
                  const TrainHyper& hyper) {
  hyper.validate();
  if (train_set.size() == 0 || crossval_set.size() == 0)
    fail(ErrorKind::validation, "training and cross-validation sets must be nonempty");
  require(train_set.dim == initial.arch.input_size() && crossval_set.dim == initial.arch.input_size(),
          "dataset dim does not match the model");

  TrainResult result;
  SpecializedModel model = initial;
  Gradients cache = zero_like(model);
  Rng rng(hyper.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double best_cv = std::numeric_limits<double>::infinity();
  result.model = model;
  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t len = std::min(hyper.batch_size, order.size() - start);
      const Gradients g = backward(model, train_set, std::span<const std::size_t>(order).subspan(start, len));
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto step = [&](std::vector<double>& p, std::vector<double>& c, const std::vector<double>& gr) {
          for (std::size_t k = 0; k < p.size(); ++k) {
            c[k] = hyper.rmsprop_decay * c[k] + (1.0 - hyper.rmsprop_decay) * gr[k] * gr[k];
            p[k] -= hyper.learning_rate * gr[k] / (std::sqrt(c[k]) + hyper.epsilon);
          }
        };
        step(model.layers[l].weights, cache[l].weights, g[l].weights);
        step(model.layers[l].biases, cache[l].biases, g[l].biases);
      }
    }
    EpochRecord rec{mean_loss(model, train_set), mean_loss(model, crossval_set)};
    result.history.push_back(rec);
    if (rec.crossval_loss < best_cv) {
      best_cv = rec.crossval_loss;
      result.model = model;
    }
    const bool rising = result.history.size() >= 2 &&
                        rec.train_loss > result.history[result.history.size() - 2].train_loss;
    if (rising) break;
  }
  result.model.train_meta.seed = initial.train_meta.seed;
  result.model.train_meta.epochs_run = static_cast<int>(result.history.size());
  result.model.train_meta.crossval_loss = best_cv;
  return result;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::negative: return "negative";
    case Verdict::positive: return "positive";
    case Verdict::uncertain: return "uncertain";
  }
  return "?";
}

Verdict classify(double c, const ThresholdPair& t) {
  if (c < t.c_low) return Verdict::negative;
  if (c > t.c_high) return Verdict::positive;
  return Verdict::uncertain;
}

std::vector<ArchSpec> default_arch_grid(InputDims input, std::uint32_t channels) {
  std::vector<ArchSpec> grid;
  for (std::uint32_t layers : {1u, 2u})
    for (std::uint32_t c : {8u, 16u, 32u, 64u}) {
      if (layers == 1) {
        grid.push_back({input.width, input.height, channels, 1, c, 0});
        continue;
      }
      for (std::uint32_t d : {16u, 32u, 64u}) grid.push_back({input.width, input.height, channels, 2, c, d});
    }
  return grid;
}

}  // namespace vidcascade
