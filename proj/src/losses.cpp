#include "sketchedit/losses.hpp"

#include "sketchedit/error.hpp"

namespace sketchedit {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw DimensionError(std::string(what) + ": shape " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
}

torch::Tensor mean_abs(const torch::Tensor& a, const torch::Tensor& b) { return (a - b).abs().mean(); }

}  // namespace

torch::Tensor loss_reconstruction(const torch::Tensor& y0, const torch::Tensor& y1, const torch::Tensor& y,
                                  const torch::Tensor& x) {
  require_same_shape(y0, x, "loss_reconstruction(y0)");
  require_same_shape(y1, x, "loss_reconstruction(y1)");
  require_same_shape(y, x, "loss_reconstruction(y)");
  return mean_abs(y0, x) + mean_abs(y1, x) + mean_abs(y, x);
}

torch::Tensor loss_adversarial_g(const torch::Tensor& fake_scores) {
  return torch::relu(1.0 - fake_scores).mean();
}

torch::Tensor loss_discriminator(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return torch::relu(1.0 - real_scores).mean() + torch::relu(1.0 + fake_scores).mean();
}

torch::Tensor blend_tensors(const torch::Tensor& y1, const torch::Tensor& x, const torch::Tensor& m) {
  return y1 * m + x * (1.0 - m);
}

BmrTerms bmr_terms(const MaskOutput& forward, const MaskOutput& reverse, const torch::Tensor& x,
                   const torch::Tensor& fx) {
  if (!forward.aux.defined() || !reverse.aux.defined()) {
    throw DimensionError("bmr_terms needs estimator outputs with the aux image");
  }
  require_same_shape(forward.aux, x, "loss_bmr");
  require_same_shape(reverse.aux, fx, "loss_bmr");
  BmrTerms t;
  t.forward_aux = mean_abs(forward.aux, x);
  t.reverse_aux = mean_abs(reverse.aux, fx);
  t.forward_blend = mean_abs(blend_tensors(forward.aux, fx, forward.mask), x);
  t.reverse_blend = mean_abs(blend_tensors(reverse.aux, x, reverse.mask), fx);
  return t;
}

BmrTerms loss_bmr(const MaskEstimatorFn& estimator, const torch::Tensor& x, const torch::Tensor& fx,
                  const torch::Tensor& c, const torch::Tensor& fc) {
  return bmr_terms(estimator(fx, c), estimator(x, fc), x, fx);
}

torch::Tensor loss_bmr(const ModelParams& p, const torch::Tensor& x, const torch::Tensor& fx,
                       const torch::Tensor& c, const torch::Tensor& fc) {
  auto est = [&p](const torch::Tensor& img, const torch::Tensor& sk) {
    return mask_estimator_forward(p, img, sk, true);
  };
  return loss_bmr(est, x, fx, c, fc).total();
}

}  // namespace sketchedit
