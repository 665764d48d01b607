#pragma once

#include <functional>

#include <torch/torch.h>

#include "sketchedit/networks.hpp"

namespace sketchedit {

/// mean|y0 - x| + mean|y1 - x| + mean|y - x|.
torch::Tensor loss_reconstruction(const torch::Tensor& y0, const torch::Tensor& y1, const torch::Tensor& y,
                                  const torch::Tensor& x);

/// Generator hinge loss: mean ReLU(1 - score).
torch::Tensor loss_adversarial_g(const torch::Tensor& fake_scores);

/// Discriminator hinge loss: mean ReLU(1 - real) + mean ReLU(1 + fake).
torch::Tensor loss_discriminator(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

/// y1 * m + x * (1 - m) on batched tensors.
torch::Tensor blend_tensors(const torch::Tensor& y1, const torch::Tensor& x, const torch::Tensor& m);

/// Four mean-L1 terms of the bi-directional mask regularization.
struct BmrTerms {
  torch::Tensor forward_aux;    // |Mbar(f(x), c) - x|
  torch::Tensor reverse_aux;    // |Mbar(x, f(c)) - f(x)|
  torch::Tensor forward_blend;  // |Mhat(f(x), c) - x|
  torch::Tensor reverse_blend;  // |Mhat(x, f(c)) - f(x)|

  [[nodiscard]] torch::Tensor total() const { return forward_aux + reverse_aux + forward_blend + reverse_blend; }
};

/// Mask estimator as a function of (image, sketch), returning mask and aux image.
using MaskEstimatorFn = std::function<MaskOutput(const torch::Tensor& image, const torch::Tensor& sketch)>;

/// Terms from already evaluated estimator outputs on (f(x), c) and (x, f(c)).
BmrTerms bmr_terms(const MaskOutput& forward, const MaskOutput& reverse, const torch::Tensor& x,
                   const torch::Tensor& fx);

BmrTerms loss_bmr(const MaskEstimatorFn& estimator, const torch::Tensor& x, const torch::Tensor& fx,
                  const torch::Tensor& c, const torch::Tensor& fc);

/// Bi-directional mask regularization with the network's mask estimator.
torch::Tensor loss_bmr(const ModelParams& p, const torch::Tensor& x, const torch::Tensor& fx,
                       const torch::Tensor& c, const torch::Tensor& fc);

}  // namespace sketchedit
