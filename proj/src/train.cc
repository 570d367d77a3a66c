#include "mprt/train.h"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "mprt/error.h"
#include "mprt/rng.h"

namespace mprt {
namespace {

std::string FormatDouble(double v, const char* fmt = "%g") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

Model InitialModel(const TrainConfig& config, const Shape& input_shape, int num_classes,
                   std::uint64_t seed) {
  Model model = BuildModel(config.architecture, input_shape, num_classes);
  InitializeParameters(model, DeriveSeed(seed, {0x1417}));
  return model;
}

double Accuracy(const Model& model, const Dataset& dataset) {
  Require(!dataset.empty(), ErrorCode::kInvalidArgument, "accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (Predict(model, dataset.inputs[i]) == dataset.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

Model Train(const TrainConfig& config, const Dataset& train, std::uint64_t seed, const Dataset* test) {
  Require(!train.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  train.Validate();
  Require(config.epochs >= 0 && config.batch_size >= 1 && config.learning_rate > 0 &&
              config.momentum >= 0 && config.momentum < 1,
          ErrorCode::kInvalidArgument, "invalid training configuration");
  Model model = InitialModel(config, train.inputs[0].shape(), train.num_classes, seed);

  const auto positions = model.ParameterisedPositions();
  ParamGrads grads(model);
  ParamGrads velocity(model);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(seed, {0x5a4f}));
  const float lr = static_cast<float>(config.learning_rate);
  const float mu = static_cast<float>(config.momentum);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.Below(i + 1)]);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      grads.Zero();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const ForwardTrace trace = Forward(model, train.inputs[idx]);
        const int label = train.labels[idx];
        const double loss = -std::log(std::max(static_cast<double>(trace.probabilities[label]), 1e-30));
        if (!std::isfinite(loss))
          Fail(ErrorCode::kTrainingDiverged,
               "loss became non-finite at epoch " + std::to_string(epoch) + ", sample " + std::to_string(idx));
        Tensor dlogits = trace.probabilities;
        dlogits[label] -= 1.0f;
        Backward(model, trace, dlogits, BackwardRule::kStandard, &grads);
      }
      const float scale = 1.0f / static_cast<float>(end - start);
      for (std::size_t pos : positions) {
        auto update = [&](Tensor& param, Tensor& grad, Tensor& vel) {
          for (std::size_t i = 0; i < param.size(); ++i) {
            vel[i] = mu * vel[i] + grad[i] * scale;
            param[i] -= lr * vel[i];
          }
        };
        update(model.MutableWeights(pos), grads.weights[pos], velocity.weights[pos]);
        update(model.MutableBias(pos), grads.bias[pos], velocity.bias[pos]);
      }
    }
  }

  Metadata& meta = model.mutable_metadata();
  meta["train_seed"] = std::to_string(seed);
  meta["epochs"] = std::to_string(config.epochs);
  meta["learning_rate"] = FormatDouble(config.learning_rate);
  meta["momentum"] = FormatDouble(config.momentum);
  meta["batch_size"] = std::to_string(config.batch_size);
  meta["train_accuracy"] = FormatDouble(Accuracy(model, train), "%.17g");
  if (test && !test->empty()) meta["test_accuracy"] = FormatDouble(Accuracy(model, *test), "%.17g");
  return model;
}

}  // namespace mprt
