#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "wdro/dataset.hpp"

namespace wdro {

enum class GeneratorKind { gaussian_blobs, concentric_rings, xor_grid };

const char* generator_name(GeneratorKind k);
GeneratorKind generator_from_name(const std::string& name);

struct DatasetSpec {
  GeneratorKind kind = GeneratorKind::gaussian_blobs;
  int n = 2;       // feature dimension
  int m = 2;       // classes (xor-grid requires exactly 2)
  int count = 100;
  std::uint64_t seed = 0;
  double separation = 4.0;  // class separation in noise units
};

// Deterministic in the seed. Class counts are balanced to within one sample.
// Every generator finishes with a per-feature affine map onto [0,1], so the
// feature box is hit exactly.
LabeledDataset generate(const DatasetSpec& spec);

// CSV with header "label,f0,...,f{n-1}", 1-based labels, features printed
// with 17 significant digits so save/load round-trips bit-exactly.
void save_csv(const std::string& path, const LabeledDataset& data);
LabeledDataset load_csv(const std::string& path);

std::string dataset_to_csv(const LabeledDataset& data);
LabeledDataset dataset_from_csv(const std::string& text);

// Seeded shuffle, then a fraction/1-fraction split. Both sides must end up
// nonempty.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double fraction,
                                                std::uint64_t seed);

}  // namespace wdro
