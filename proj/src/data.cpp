#include "wdro/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wdro/errors.hpp"
#include "wdro/rng.hpp"

namespace wdro {

const char* generator_name(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::gaussian_blobs: return "gaussian-blobs";
    case GeneratorKind::concentric_rings: return "concentric-rings";
    case GeneratorKind::xor_grid: return "xor-grid";
  }
  return "gaussian-blobs";
}

GeneratorKind generator_from_name(const std::string& name) {
  if (name == "gaussian-blobs") return GeneratorKind::gaussian_blobs;
  if (name == "concentric-rings") return GeneratorKind::concentric_rings;
  if (name == "xor-grid") return GeneratorKind::xor_grid;
  throw ValidationError("data: unknown generator '" + name + "'");
}

namespace {

std::vector<int> balanced_counts(int total, int classes) {
  std::vector<int> counts(static_cast<std::size_t>(classes), total / classes);
  for (int c = 0; c < total % classes; ++c) counts[static_cast<std::size_t>(c)]++;
  return counts;
}

// per-feature affine map onto [0,1]; constant features land on 0.5
void box_map(LabeledDataset& data) {
  const std::size_t n = static_cast<std::size_t>(data.n);
  for (std::size_t j = 0; j < n; ++j) {
    double lo = data.samples[0].x[j], hi = lo;
    for (const Sample& s : data.samples) {
      lo = std::min(lo, s.x[j]);
      hi = std::max(hi, s.x[j]);
    }
    const double span = hi - lo;
    for (Sample& s : data.samples)
      s.x[j] = span > 0.0 ? (s.x[j] - lo) / span : 0.5;
  }
}

LabeledDataset gen_blobs(const DatasetSpec& spec, std::mt19937_64& rng) {
  LabeledDataset data;
  data.n = spec.n;
  data.m = spec.m;
  const auto counts = balanced_counts(spec.count, spec.m);
  for (int c = 0; c < spec.m; ++c) {
    // centers sit on the coordinate axes: +e0, -e0, +e1, -e1, ... growing
    // outward once the axes are exhausted
    const std::size_t axis = static_cast<std::size_t>((c / 2) % spec.n);
    const double sign = (c % 2 == 0) ? 1.0 : -1.0;
    const double radius = (spec.separation / 2.0) * (1.0 + static_cast<double>(c / (2 * spec.n)));
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      Sample s;
      s.y = c + 1;
      s.x = Tensor::zeros({static_cast<std::size_t>(spec.n)});
      for (std::size_t j = 0; j < s.x.numel(); ++j) s.x[j] = normal01(rng);
      s.x[axis] += sign * radius;
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

LabeledDataset gen_rings(const DatasetSpec& spec, std::mt19937_64& rng) {
  if (spec.n < 2) throw ValidationError("data: concentric-rings needs at least 2 features");
  LabeledDataset data;
  data.n = spec.n;
  data.m = spec.m;
  const auto counts = balanced_counts(spec.count, spec.m);
  const double ring_gap = 1.0 / static_cast<double>(spec.m + 1);
  const double sigma = ring_gap / std::max(spec.separation, 1e-9);
  for (int c = 0; c < spec.m; ++c) {
    const double base_radius = ring_gap * static_cast<double>(c + 1);
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      Sample s;
      s.y = c + 1;
      s.x = Tensor::zeros({static_cast<std::size_t>(spec.n)});
      const double angle = uniform_in(rng, 0.0, 6.283185307179586477);
      const double rho = base_radius + sigma * normal01(rng);
      s.x[0] = rho * std::cos(angle);
      s.x[1] = rho * std::sin(angle);
      for (std::size_t j = 2; j < s.x.numel(); ++j) s.x[j] = sigma * normal01(rng);
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

LabeledDataset gen_xor(const DatasetSpec& spec, std::mt19937_64& rng) {
  if (spec.n < 2) throw ValidationError("data: xor-grid needs at least 2 features");
  if (spec.m != 2) throw ValidationError("data: xor-grid is a two-class pattern");
  LabeledDataset data;
  data.n = spec.n;
  data.m = 2;
  const auto counts = balanced_counts(spec.count, 2);
  // margin keeps a separation-controlled band around the two axes empty
  const double margin = 0.5 * spec.separation / (spec.separation + 10.0);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      Sample s;
      s.y = c + 1;
      s.x = Tensor::zeros({static_cast<std::size_t>(spec.n)});
      // class 1 in the (+,+)/(-,-) quadrants, class 2 in (+,-)/(-,+)
      const bool flip = (i % 2) == 1;
      const double su = flip ? -1.0 : 1.0;
      const double sv = (c == 0) == !flip ? 1.0 : -1.0;
      s.x[0] = su * uniform_in(rng, margin, 1.0);
      s.x[1] = sv * uniform_in(rng, margin, 1.0);
      for (std::size_t j = 2; j < s.x.numel(); ++j) s.x[j] = uniform_in(rng, -1.0, 1.0);
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

}  // namespace

LabeledDataset generate(const DatasetSpec& spec) {
  if (spec.n < 1) throw ValidationError("data: feature dimension must be positive");
  if (spec.m < 2) throw ValidationError("data: need at least two classes");
  if (spec.count < spec.m) throw ValidationError("data: need at least one sample per class");
  if (!(spec.separation > 0.0)) throw ValidationError("data: separation must be positive");

  auto rng = make_rng(spec.seed, generator_name(spec.kind));
  LabeledDataset data;
  switch (spec.kind) {
    case GeneratorKind::gaussian_blobs: data = gen_blobs(spec, rng); break;
    case GeneratorKind::concentric_rings: data = gen_rings(spec, rng); break;
    case GeneratorKind::xor_grid: data = gen_xor(spec, rng); break;
  }
  box_map(data);
  validate_dataset(data);
  return data;
}

std::string dataset_to_csv(const LabeledDataset& data) {
  validate_dataset(data);
  std::string out = "label";
  for (int j = 0; j < data.n; ++j) {
    out += ",f";
    out += std::to_string(j);
  }
  out += "\n";
  char buf[64];
  for (const Sample& s : data.samples) {
    out += std::to_string(s.y);
    for (std::size_t j = 0; j < s.x.numel(); ++j) {
      std::snprintf(buf, sizeof(buf), ",%.17g", s.x[j]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void save_csv(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw ValidationError("data: cannot write " + path);
  out << dataset_to_csv(data);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

LabeledDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("data: empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_line(line);
  if (header.empty() || header[0] != "label")
    throw ValidationError("data: CSV header must start with 'label'");
  const int n = static_cast<int>(header.size()) - 1;
  if (n < 1) throw ValidationError("data: CSV has no feature columns");
  for (int j = 0; j < n; ++j)
    if (header[static_cast<std::size_t>(j + 1)] != "f" + std::to_string(j))
      throw ValidationError("data: CSV header column " + std::to_string(j + 1) +
                            " must be f" + std::to_string(j));

  LabeledDataset data;
  data.n = n;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != static_cast<std::size_t>(n + 1))
      throw ValidationError("data: row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(n + 1));
    Sample s;
    {
      const std::string& f = fields[0];
      int value = 0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || value < 1)
        throw ValidationError("data: row " + std::to_string(row) + " has bad label '" + f + "'");
      s.y = value;
    }
    s.x = Tensor::zeros({static_cast<std::size_t>(n)});
    for (int j = 0; j < n; ++j) {
      const std::string& f = fields[static_cast<std::size_t>(j + 1)];
      double value = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
        throw ValidationError("data: row " + std::to_string(row) + " has bad feature '" + f + "'");
      if (!std::isfinite(value) || value < 0.0 || value > 1.0)
        throw ValidationError("data: row " + std::to_string(row) + " feature " +
                              std::to_string(j) + " outside [0,1]: '" + f + "'");
      s.x[static_cast<std::size_t>(j)] = value;
    }
    data.samples.push_back(std::move(s));
  }
  if (data.samples.empty()) throw ValidationError("data: CSV has no rows");
  int m = 0;
  for (const Sample& s : data.samples) m = std::max(m, s.y);
  data.m = m;
  validate_dataset(data);
  return data;
}

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("data: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_csv(ss.str());
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double fraction,
                                                std::uint64_t seed) {
  validate_dataset(data);
  if (!(fraction > 0.0) || !(fraction < 1.0))
    throw ValidationError("data: split fraction must lie strictly between 0 and 1");
  const std::size_t total = data.samples.size();
  const std::size_t take =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  if (take == 0 || take >= total)
    throw ValidationError("data: split would leave an empty side");

  std::vector<std::size_t> index(total);
  std::iota(index.begin(), index.end(), 0);
  auto rng = make_rng(seed, "data.split");
  shuffle(index, rng);

  LabeledDataset left, right;
  left.n = right.n = data.n;
  left.m = right.m = data.m;
  for (std::size_t k = 0; k < total; ++k) {
    (k < take ? left : right).samples.push_back(data.samples[index[k]]);
  }
  return {std::move(left), std::move(right)};
}

}  // namespace wdro
