#include "unit/doctest.hpp"

#include "sketchedit/sketchgen.hpp"
#include "unit/test_util.hpp"

using namespace sketchedit;

namespace {

Image vertical_step(int h, int w, int at) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = at; x < w; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0f;
    }
  }
  return img;
}

}  // namespace

TEST_SUITE("sketchgen") {
  TEST_CASE("constant image has no edges") {
    CHECK(extract_edges(Image(20, 20, 0.3f)).count_nonzero() == 0);
  }

  TEST_CASE("vertical step yields a single one-pixel line") {
    // Smoothed step 0, 1/4, 3/4, 1 gives equal derivatives 3/8 at columns 15
    // and 16; the tie resolves toward +x, so only column 16 survives.
    const auto e = extract_edges(vertical_step(32, 32, 16));
    CHECK(e.binary());
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) CHECK(e.at(y, x) == (x == 16 ? 1.0f : 0.0f));
    }
    EdgeConfig raw;
    raw.smoothing_radius = 0;
    const auto r = extract_edges(vertical_step(24, 24, 10), raw);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) CHECK(r.at(y, x) == (x == 10 ? 1.0f : 0.0f));
    }
  }

  TEST_CASE("edges are invariant to a constant offset") {
    auto img = testutil::random_image(24, 24, 1);
    for (auto& v : img.values()) v *= 0.5f;
    auto shifted = img;
    for (auto& v : shifted.values()) v += 0.25f;
    CHECK(extract_edges(img) == extract_edges(shifted));
  }

  TEST_CASE("thresholds are validated") {
    EdgeConfig cfg;
    cfg.low = 0.3;
    cfg.high = 0.2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = EdgeConfig{};
    cfg.smoothing_radius = -1;
    CHECK_THROWS_AS(extract_edges(Image(8, 8), cfg), ConfigError);
  }

  TEST_CASE("partial sketch is the intersection with the region") {
    const auto edges = extract_edges(testutil::random_image(32, 32, 2));
    REQUIRE(edges.count_nonzero() > 0);
    CHECK(partial_sketch(edges, RegionSpec::full(32, 32)) == edges);
    const RegionSpec region{32, 32, 5, 7, 20, 18};
    const auto part = partial_sketch(edges, region);
    std::size_t expected = 0;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const bool in = region.contains(x, y);
        expected += (in && edges.at(y, x) != 0.0f) ? 1 : 0;
        CHECK(part.at(y, x) <= edges.at(y, x));
        if (in) CHECK(part.at(y, x) == edges.at(y, x));
      }
    }
    CHECK(part.count_nonzero() == expected);
    const auto none = partial_sketch(extract_edges(vertical_step(32, 32, 16)), RegionSpec{32, 32, 1, 1, 10, 10});
    CHECK(none.count_nonzero() == 0);
  }

  TEST_CASE("training pairs are local and deterministic") {
    const auto x = testutil::random_image(48, 48, 3);
    PairConfig cfg;
    Rng a(9), b(9);
    const auto p = make_training_pair(x, a, cfg);
    const auto q = make_training_pair(x, b, cfg);
    CHECK(p.x_warped == q.x_warped);
    CHECK(p.sketch == q.sketch);
    CHECK(p.sketch_warped == q.sketch_warped);
    CHECK(p.region == q.region);
    CHECK(p.sketch == partial_sketch(extract_edges(x), p.region));
    CHECK(p.sketch_warped == apply_warp(p.field, p.sketch, Interp::kNearest));
    for (int y = 0; y < 48; ++y) {
      for (int xx = 0; xx < 48; ++xx) {
        if (p.region.contains(xx, y)) continue;
        for (int c = 0; c < 3; ++c) CHECK(p.x_warped.at(y, xx, c) == x.at(y, xx, c));
      }
    }

    PairConfig still;
    still.warp.max_displacement_fraction = 0.0;
    Rng r(10);
    CHECK(make_training_pair(x, r, still).x_warped == x);
  }
}
