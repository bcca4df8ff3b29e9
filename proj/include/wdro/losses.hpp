#pragma once

#include <string>
#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/model.hpp"
#include "wdro/tensor.hpp"
#include "wdro/transport.hpp"

namespace wdro {

enum class LossKind { ce, dlr, redlr };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

// Logit-level losses. y is 1-based.
//
// ce:    -(log softmax z)_y, computed in the log domain
// dlr:   -(z_y - z_(2)) / (z_(1) - z_(3)) when y is the strict unique argmax,
//        -(z_y - z_(1)) / (z_(1) - z_(3)) otherwise; needs m >= 3
// redlr: min(dlr, 0), i.e. dlr clipped from above at 0; on misclassified
//        points the value and the gradient are exactly zero
//
// Order statistics z_(1) >= z_(2) >= z_(3) break ties by coordinate index.
// When z_(1) - z_(3) < 1e-12 the ratio is declared degenerate: dlr/redlr
// return 0 with a zero gradient instead of dividing by noise.
double ce(const Tensor& z, int y);
double dlr(const Tensor& z, int y);
double redlr(const Tensor& z, int y);

double loss_value(const Network& net, LossKind kind, const Tensor& x, int y);

struct InputGradResult {
  double value = 0.0;
  Tensor grad;  // dJ/dx, shape {n}
};
InputGradResult loss_with_input_grad(const Network& net, LossKind kind, const Tensor& x, int y);
Tensor input_grad(const Network& net, LossKind kind, const Tensor& x, int y);

struct ParamGradResult {
  double value = 0.0;
  std::vector<double> grad;  // aligned with flatten_params
};
ParamGradResult loss_with_param_grad(const Network& net, LossKind kind, const Tensor& x, int y);

// One backward sweep, both gradients.
struct FullGradResult {
  double value = 0.0;
  Tensor grad_x;
  std::vector<double> grad_theta;
};
FullGradResult loss_with_all_grads(const Network& net, LossKind kind, const Tensor& x, int y);

// Empirical Lipschitz proxy: max over samples of the dual norm of the input
// gradient. An estimate from below; nothing is claimed beyond the sample.
double estimate_lipschitz(const Network& net, LossKind kind, const LabeledDataset& data,
                          DualNorm s);

}  // namespace wdro
