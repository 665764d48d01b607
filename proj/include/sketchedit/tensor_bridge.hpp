#pragma once

#include <vector>

#include <torch/torch.h>

#include "sketchedit/raster.hpp"

namespace sketchedit {

/// HWC raster -> 1 x C x H x W tensor.
template <int C>
torch::Tensor to_tensor(const Raster<C>& r, torch::Dtype dtype = torch::kFloat32) {
  auto vals = r.values();
  auto t = torch::from_blob(const_cast<float*>(vals.data()), {r.height(), r.width(), C}, torch::kFloat32);
  return t.permute({2, 0, 1}).unsqueeze(0).to(dtype).contiguous().clone();
}

/// Stacks rasters of equal size into N x C x H x W.
template <typename R>
torch::Tensor stack_tensors(const std::vector<R>& items, torch::Dtype dtype = torch::kFloat32) {
  std::vector<torch::Tensor> parts;
  parts.reserve(items.size());
  for (const auto& r : items) parts.push_back(to_tensor(r, dtype));
  return torch::cat(parts, 0);
}

/// Reads item `n` of an N x C x H x W tensor back into a raster (values copied as float).
template <int C>
std::vector<float> tensor_values(const torch::Tensor& t, int64_t n) {
  auto hwc = t.detach()[n].permute({1, 2, 0}).to(torch::kFloat32).contiguous();
  if (hwc.size(2) != C) throw DimensionError("tensor channel count mismatch");
  const float* p = hwc.data_ptr<float>();
  return std::vector<float>(p, p + hwc.numel());
}

inline Image image_from_tensor(const torch::Tensor& t, int64_t n = 0) {
  return Image(static_cast<int>(t.size(2)), static_cast<int>(t.size(3)),
               tensor_values<3>(t.clamp(0.0, 1.0), n));
}

inline Mask mask_from_tensor(const torch::Tensor& t, int64_t n = 0) {
  return Mask(static_cast<int>(t.size(2)), static_cast<int>(t.size(3)), tensor_values<1>(t.clamp(0.0, 1.0), n));
}

}  // namespace sketchedit
