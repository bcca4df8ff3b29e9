#pragma once

#include <cstddef>
#include <vector>

#include "wdro/tensor.hpp"

namespace wdro {

// Labels are 1-based everywhere (class y of m), matching the on-disk format.
struct Sample {
  Tensor x;
  int y = 0;
};

// Point cloud with equal weights. Features are expected in [0,1]^n; public
// operations that construct datasets clamp into the box.
struct LabeledDataset {
  int n = 0;  // feature dimension
  int m = 0;  // number of classes
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

// Throws ValidationError on empty data, shape mismatches, labels outside
// 1..m, or features outside [0,1].
void validate_dataset(const LabeledDataset& data);

// Clamp every feature into [0,1]. Values already inside are left bit-exact.
void clamp_features(LabeledDataset& data);

double clamp01(double v);

}  // namespace wdro
