#ifndef MPRT_DATASET_H_
#define MPRT_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mprt/tensor.h"

namespace mprt {

struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  int num_classes = 0;
  std::string split;  // "train" or "test"

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
  // First n samples (all if n exceeds size).
  Dataset Head(std::size_t n) const;
  // Throws unless shapes agree and every label is in [0, num_classes).
  void Validate() const;
};

struct SyntheticSpec {
  int classes = 10;
  int image_size = 16;
  int train_samples = 2000;
  int test_samples = 500;
  // Standard deviation of additive pixel noise.
  double noise = 0.15;
  // Template translation jitter in pixels.
  int max_shift = 3;
};

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

// Class-conditional stroke images, values roughly in [0, 1] plus noise. All
// classes place a short stroke at the same four anchors and differ only in
// the stroke orientations. Samples jitter the whole pattern and its
// amplitude, add a distractor blob and Gaussian pixel noise. Classes are
// balanced and sample order is shuffled.
DatasetSplits GenerateSynthetic(const SyntheticSpec& spec, std::uint64_t seed);

// IDX reader: images with magic 0x00000803 (ubyte, scaled to [0, 1]) or
// 0x00000D03 (big-endian float32); labels with magic 0x00000801. Images
// become [1, H, W] tensors. num_classes <= 0 infers max(label) + 1.
Dataset ReadIdx(const std::string& images_path, const std::string& labels_path, int num_classes = 0);
// Writes float32 images (0x00000D03) and ubyte labels (0x00000801).
void WriteIdx(const Dataset& dataset, const std::string& images_path, const std::string& labels_path);

}  // namespace mprt

#endif  // MPRT_DATASET_H_
