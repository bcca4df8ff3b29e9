#include "wdro/dataset.hpp"

#include <cmath>
#include <string>

#include "wdro/errors.hpp"

namespace wdro {

double clamp01(double v) {
  if (v < 0.0) return 0.0;
  if (v > 1.0) return 1.0;
  return v;
}

void validate_dataset(const LabeledDataset& data) {
  if (data.samples.empty()) throw ValidationError("dataset: empty");
  if (data.n <= 0) throw ValidationError("dataset: feature dimension must be positive");
  if (data.m < 2) throw ValidationError("dataset: need at least two classes");
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    if (s.x.shape != std::vector<std::size_t>{static_cast<std::size_t>(data.n)})
      throw ValidationError("dataset: sample " + std::to_string(i) + " has shape " +
                            s.x.shape_str() + ", expected {" + std::to_string(data.n) + "}");
    if (s.y < 1 || s.y > data.m)
      throw ValidationError("dataset: sample " + std::to_string(i) + " label " +
                            std::to_string(s.y) + " outside 1.." + std::to_string(data.m));
    for (double v : s.x.values) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw ValidationError("dataset: sample " + std::to_string(i) +
                              " feature outside [0,1]: " + std::to_string(v));
    }
  }
}

void clamp_features(LabeledDataset& data) {
  for (Sample& s : data.samples)
    for (double& v : s.x.values) v = clamp01(v);
}

}  // namespace wdro
