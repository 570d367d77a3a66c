#ifndef MPRT_TRAIN_H_
#define MPRT_TRAIN_H_

#include <cstdint>

#include "mprt/architectures.h"
#include "mprt/dataset.h"
#include "mprt/model.h"

namespace mprt {

struct TrainConfig {
  Architecture architecture = Architecture::kLeNet;
  int epochs = 20;
  double learning_rate = 0.001;
  double momentum = 0.9;
  int batch_size = 1;
};

// The untrained model Train starts from for the same (config, seed).
Model InitialModel(const TrainConfig& config, const Shape& input_shape, int num_classes,
                   std::uint64_t seed);

// Mini-batch SGD with heavy-ball momentum on softmax cross-entropy. Sample
// order is reshuffled each epoch from the seed. Records seed, epochs, and
// final train (and, when given, test) accuracy in the model metadata. Throws
// kTrainingDiverged when the loss becomes non-finite.
Model Train(const TrainConfig& config, const Dataset& train, std::uint64_t seed,
            const Dataset* test = nullptr);

// Fraction of samples whose argmax logit equals the label.
double Accuracy(const Model& model, const Dataset& dataset);

}  // namespace mprt

#endif  // MPRT_TRAIN_H_
