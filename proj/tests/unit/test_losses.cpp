#include "unit/doctest.hpp"

#include "sketchedit/losses.hpp"
#include "unit/test_util.hpp"

using namespace sketchedit;

namespace {

double scalar(const torch::Tensor& t) { return t.item<double>(); }

// Mean absolute difference by explicit iteration.
double brute_l1(const torch::Tensor& a, const torch::Tensor& b) {
  const auto fa = a.contiguous().to(torch::kFloat64).flatten();
  const auto fb = b.contiguous().to(torch::kFloat64).flatten();
  const auto* pa = fa.data_ptr<double>();
  const auto* pb = fb.data_ptr<double>();
  double s = 0.0;
  for (int64_t i = 0; i < fa.numel(); ++i) s += std::abs(pa[i] - pb[i]);
  return s / static_cast<double>(fa.numel());
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("reconstruction loss") {
    torch::manual_seed(1);
    const auto x = torch::rand({2, 3, 8, 8}, torch::kFloat64);
    CHECK(scalar(loss_reconstruction(x, x, x, x)) == 0.0);
    const auto off = x + 0.1;
    CHECK(std::abs(scalar(loss_reconstruction(off, off, off, x)) - 0.3) <= 1e-6);
    const auto a = torch::rand_like(x), b = torch::rand_like(x), c = torch::rand_like(x);
    const double expected = brute_l1(a, x) + brute_l1(b, x) + brute_l1(c, x);
    CHECK(std::abs(scalar(loss_reconstruction(a, b, c, x)) - expected) <= 1e-12);
    CHECK_THROWS(loss_reconstruction(a, b, c, torch::rand({2, 3, 4, 4}, torch::kFloat64)));
  }

  TEST_CASE("generator hinge loss") {
    CHECK(scalar(loss_adversarial_g(torch::full({2, 1, 4, 4}, 1.5))) == 0.0);
    CHECK(scalar(loss_adversarial_g(torch::ones({2, 1, 4, 4}))) == 0.0);
    CHECK(scalar(loss_adversarial_g(torch::zeros({2, 1, 4, 4}))) == 1.0);
    CHECK(scalar(loss_adversarial_g(torch::full({2, 1, 4, 4}, -1.0))) == 2.0);
  }

  TEST_CASE("discriminator hinge loss") {
    const auto one = torch::ones({3, 1, 2, 2});
    CHECK(scalar(loss_discriminator(one, -one)) == 0.0);
    CHECK(scalar(loss_discriminator(0 * one, 0 * one)) == 2.0);
    CHECK(scalar(loss_discriminator(-one, one)) == 4.0);
  }

  TEST_CASE("blend_tensors") {
    torch::manual_seed(2);
    const auto y1 = torch::rand({1, 3, 4, 4}), x = torch::rand({1, 3, 4, 4});
    CHECK(torch::equal(blend_tensors(y1, x, torch::zeros({1, 1, 4, 4})), x));
    CHECK(torch::equal(blend_tensors(y1, x, torch::ones({1, 1, 4, 4})), y1));
  }

  TEST_CASE("BMR with identity warp and an image-returning stub is zero") {
    torch::manual_seed(3);
    const auto x = torch::rand({2, 3, 8, 8}, torch::kFloat64);
    const auto c = (torch::rand({2, 1, 8, 8}, torch::kFloat64) > 0.7).to(torch::kFloat64);
    const MaskEstimatorFn stub = [](const torch::Tensor& image, const torch::Tensor& sketch) {
      return MaskOutput{torch::rand_like(sketch), image};
    };
    const auto t = loss_bmr(stub, x, x, c, c);
    CHECK(std::abs(scalar(t.total())) <= 1e-12);
  }

  TEST_CASE("BMR with zero aux and unit mask on x = 0.5 is 2") {
    const auto x = torch::full({2, 3, 8, 8}, 0.5, torch::kFloat64);
    const auto c = torch::zeros({2, 1, 8, 8}, torch::kFloat64);
    const MaskEstimatorFn stub = [](const torch::Tensor& image, const torch::Tensor& sketch) {
      return MaskOutput{torch::ones_like(sketch), torch::zeros_like(image)};
    };
    const auto t = loss_bmr(stub, x, x, c, c);
    CHECK(std::abs(scalar(t.total()) - 2.0) <= 1e-6);
    CHECK(std::abs(scalar(t.forward_aux) - 0.5) <= 1e-12);
    CHECK(std::abs(scalar(t.reverse_blend) - 0.5) <= 1e-12);
  }

  TEST_CASE("BMR terms match a term-by-term recomputation") {
    torch::manual_seed(4);
    const auto x = torch::rand({2, 3, 8, 8}, torch::kFloat64);
    const auto fx = torch::rand({2, 3, 8, 8}, torch::kFloat64);
    const auto c = (torch::rand({2, 1, 8, 8}, torch::kFloat64) > 0.7).to(torch::kFloat64);
    const auto fc = (torch::rand({2, 1, 8, 8}, torch::kFloat64) > 0.7).to(torch::kFloat64);
    // Deterministic stub whose outputs depend on both inputs.
    const MaskEstimatorFn stub = [](const torch::Tensor& image, const torch::Tensor& sketch) {
      return MaskOutput{torch::sigmoid(image.mean(1, true) + sketch), (image.flip(3) + sketch) * 0.5};
    };
    const auto t = loss_bmr(stub, x, fx, c, fc);
    const auto a = stub(fx, c);
    const auto b = stub(x, fc);
    const auto hat_a = a.aux * a.mask + fx * (1 - a.mask);
    const auto hat_b = b.aux * b.mask + x * (1 - b.mask);
    CHECK(std::abs(scalar(t.forward_aux) - brute_l1(a.aux, x)) <= 1e-12);
    CHECK(std::abs(scalar(t.reverse_aux) - brute_l1(b.aux, fx)) <= 1e-12);
    CHECK(std::abs(scalar(t.forward_blend) - brute_l1(hat_a, x)) <= 1e-12);
    CHECK(std::abs(scalar(t.reverse_blend) - brute_l1(hat_b, fx)) <= 1e-12);
  }

  TEST_CASE("network BMR is finite and non-negative") {
    const auto cfg = testutil::tiny_config();
    const auto p = ModelParams::init(cfg.net, 5);
    torch::manual_seed(5);
    const auto x = torch::rand({2, 3, 16, 16});
    const auto c = (torch::rand({2, 1, 16, 16}) > 0.8).to(torch::kFloat32);
    const double v = scalar(loss_bmr(p, x, x.flip(3), c, c.flip(3)));
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
}
