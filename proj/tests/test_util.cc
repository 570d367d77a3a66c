#include "test_util.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "mprt/train.h"

namespace mprt::testing {

Model LinearModel(const std::vector<std::vector<float>>& weights, const std::vector<float>& bias) {
  const int out = static_cast<int>(weights.size());
  const int in = static_cast<int>(weights[0].size());
  Layer dense = Layer::Dense(in, out);
  for (int o = 0; o < out; ++o)
    for (int i = 0; i < in; ++i) dense.weights[static_cast<std::size_t>(o) * in + i] = weights[o][i];
  for (int o = 0; o < out; ++o) dense.bias[o] = bias[o];
  return Model({in}, out, {dense});
}

Model RandomModel(Architecture arch, const Shape& input_shape, int classes, std::uint64_t seed, bool with_bias) {
  Model model = BuildModel(arch, input_shape, classes);
  InitializeParameters(model, seed);
  if (with_bias) {
    Rng rng(DeriveSeed(seed, {99}));
    for (std::size_t pos : model.ParameterisedPositions())
      for (float& b : model.MutableBias(pos).values()) b = static_cast<float>(rng.Uniform(-0.1, 0.1));
  }
  return model;
}

Tensor RandomTensor(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  Tensor t(shape);
  Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.Uniform(lo, hi));
  return t;
}

const DatasetSplits& SmallData() {
  static const DatasetSplits data = [] {
    SyntheticSpec spec;
    spec.image_size = 8;
    spec.max_shift = 0;
    return GenerateSynthetic(spec, 7);
  }();
  return data;
}

const Model& TrainedLeNet() {
  static const Model model = Train(TrainConfig{}, SmallData().train, 3, &SmallData().test);
  return model;
}

const Model& TrainedResNet() {
  static const Model model = [] {
    TrainConfig config;
    config.architecture = Architecture::kMiniResNet;
    return Train(config, SmallData().train, 3, &SmallData().test);
  }();
  return model;
}

}  // namespace mprt::testing

namespace mprt::testing {
namespace {

struct Value {
  Shape shape;
  std::vector<double> data;
};

// Records which side of every ReLU kink and which max-pool winner the input
// lands on; finite differences are only valid where this does not change.
using Pattern = std::vector<int>;

Value RefLayer(const Model& model, std::size_t pos, const Value& x, Pattern* pattern) {
  const Layer& layer = model.layer(pos);
  switch (layer.kind) {
    case LayerKind::kDense: {
      const int out = layer.weights.dim(0), in = layer.weights.dim(1);
      Value y{{out}, std::vector<double>(out)};
      for (int o = 0; o < out; ++o) {
        double s = layer.bias[o];
        for (int i = 0; i < in; ++i) s += double(layer.weights[std::size_t(o) * in + i]) * x.data[i];
        y.data[o] = s;
      }
      return y;
    }
    case LayerKind::kConv2D: {
      const int co = layer.weights.dim(0), ci = layer.weights.dim(1), k = layer.weights.dim(2);
      const int h = x.shape[1], w = x.shape[2], p = layer.padding;
      const int oh = h + 2 * p - k + 1, ow = w + 2 * p - k + 1;
      Value y{{co, oh, ow}, std::vector<double>(std::size_t(co) * oh * ow)};
      for (int o = 0; o < co; ++o)
        for (int r = 0; r < oh; ++r)
          for (int c = 0; c < ow; ++c) {
            double s = layer.bias[o];
            for (int i = 0; i < ci; ++i)
              for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                  const int rr = r + u - p, cc = c + v - p;
                  if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                  s += double(layer.weights[((std::size_t(o) * ci + i) * k + u) * k + v]) *
                       x.data[(std::size_t(i) * h + rr) * w + cc];
                }
            y.data[(std::size_t(o) * oh + r) * ow + c] = s;
          }
      return y;
    }
    case LayerKind::kReLU: {
      Value y = x;
      for (double& v : y.data) {
        pattern->push_back(v > 0);
        v = v > 0 ? v : 0;
      }
      return y;
    }
    case LayerKind::kMaxPool2D: {
      const int ch = x.shape[0], h = x.shape[1], w = x.shape[2], s = layer.pool_size;
      const int oh = h / s, ow = w / s;
      Value y{{ch, oh, ow}, std::vector<double>(std::size_t(ch) * oh * ow)};
      for (int c = 0; c < ch; ++c)
        for (int r = 0; r < oh; ++r)
          for (int q = 0; q < ow; ++q) {
            double m = -1e300;
            int winner = 0;
            for (int u = 0; u < s; ++u)
              for (int v = 0; v < s; ++v) {
                const double candidate = x.data[(std::size_t(c) * h + r * s + u) * w + q * s + v];
                if (candidate > m) {
                  m = candidate;
                  winner = u * s + v;
                }
              }
            pattern->push_back(winner);
            y.data[(std::size_t(c) * oh + r) * ow + q] = m;
          }
      return y;
    }
    case LayerKind::kFlatten:
      return {{static_cast<int>(x.data.size())}, x.data};
    default:
      return x;
  }
}

}  // namespace

std::vector<double> ReferenceForward(const Model& model, const std::vector<double>& input, std::vector<int>* pattern) {
  Value x{model.input_shape(), input};
  std::vector<Value> skips;
  for (std::size_t pos = 0; pos <= model.logit_position(); ++pos) {
    const LayerKind kind = model.layer(pos).kind;
    if (kind == LayerKind::kSkipBegin) {
      skips.push_back(x);
    } else if (kind == LayerKind::kSkipEnd) {
      for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += skips.back().data[i];
      skips.pop_back();
    } else {
      x = RefLayer(model, pos, x, pattern);
    }
  }
  return x.data;
}

std::vector<double> ReferenceLogits(const Model& model, const std::vector<double>& input) {
  Pattern pattern;
  return ReferenceForward(model, input, &pattern);
}

GradientCheck CheckInputGradient(const Model& model, const Tensor& input, int class_index, double h,
                                 double tolerance, double floor) {
  const Tensor analytic = InputGradient(model, input, class_index);
  std::vector<double> x(input.values().begin(), input.values().end());
  GradientCheck check;
  Pattern centre;
  const double centre_value = ReferenceForward(model, x, &centre)[class_index];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    Pattern up_pattern, down_pattern;
    x[i] = saved + h;
    const double up = ReferenceForward(model, x, &up_pattern)[class_index];
    x[i] = saved - h;
    const double down = ReferenceForward(model, x, &down_pattern)[class_index];
    x[i] = saved;
    // Nets here are piecewise linear, so a one-sided difference that stays on
    // the centre's linear piece is exact up to rounding.
    double numeric;
    if (up_pattern == centre && down_pattern == centre) {
      numeric = (up - down) / (2 * h);
    } else if (up_pattern == centre) {
      numeric = (up - centre_value) / h;
      ++check.one_sided;
    } else if (down_pattern == centre) {
      numeric = (centre_value - down) / h;
      ++check.one_sided;
    } else {
      ++check.non_smooth;
      continue;
    }
    const double a = analytic[i];
    const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
    ++check.coordinates;
    if (rel < tolerance) ++check.within_tolerance;
    check.worst_relative_error = std::max(check.worst_relative_error, rel);
  }
  return check;
}

// Fingerprint of the condition an estimator is asked to score.
double Fingerprint(const Model& model, const Dataset& dataset) {
  double f = 0;
  for (std::size_t pos : model.ParameterisedPositions())
    for (float w : model.layer(pos).weights.values()) f += w;
  for (const Tensor& x : dataset.inputs)
    for (float v : x.values()) f += v;
  return f;
}

double MeanAbsDiff(std::span<const float> a, std::span<const float> b) {
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::fabs(double(a[i]) - b[i]);
  return total / double(a.size());
}

ScoreMatrix OracleEstimator::Score(const Model& model, const Dataset& dataset, const std::vector<MethodConfig>& methods,
                                 std::uint64_t) const {
  double drift = 0;
  for (std::size_t pos : model.ParameterisedPositions()) {
    const Tensor& original = model_.layer(pos).weights;
    const double scale = MeanAbsDiff(original.values(), Tensor(original.shape()).values());
    drift = std::max(drift, MeanAbsDiff(model.layer(pos).weights.values(), original.values()) / scale);
  }
  for (std::size_t i = 0; i < dataset.size(); ++i)
    drift = std::max(drift, MeanAbsDiff(dataset.inputs[i].values(), dataset_.inputs[i].values()));
  const bool disrupted = drift > 0.1;
  Rng rng(std::bit_cast<std::uint64_t>(Fingerprint(model, dataset)));
  ScoreMatrix m(methods.size(), std::vector<std::optional<double>>(dataset.size()));
  for (std::size_t j = 0; j < methods.size(); ++j)
    for (std::size_t i = 0; i < dataset.size(); ++i)
      m[j][i] = disrupted ? -10.0 - rng.Uniform() : double(j) + 0.001 * double(i);
  return m;
}

}  // namespace mprt::testing
