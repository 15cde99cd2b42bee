#include <gtest/gtest.h>

#include <vector>

#include "photoncal/mask.hpp"

using namespace photoncal;

TEST(Mask, ShapeMembership) {
  const MaskShape rect = MaskRect{1.0, 2.0, 3.0, 1.0};
  EXPECT_TRUE(contains(rect, 1.0, 2.0));
  EXPECT_TRUE(contains(rect, 3.9, 2.9));
  EXPECT_FALSE(contains(rect, 4.0, 2.5));
  EXPECT_FALSE(contains(rect, 2.0, 3.0));

  const MaskShape ellipse = MaskEllipse{5.0, 5.0, 4.0, 2.0};
  EXPECT_TRUE(contains(ellipse, 9.0, 5.0));
  EXPECT_TRUE(contains(ellipse, 5.0, 3.0));
  EXPECT_FALSE(contains(ellipse, 8.0, 6.5));

  // Concave "L": the notch is outside.
  const MaskShape poly = MaskPolygon{{{0, 0}, {4, 0}, {4, 2}, {2, 2}, {2, 4}, {0, 4}}};
  EXPECT_TRUE(contains(poly, 1.0, 1.0));
  EXPECT_TRUE(contains(poly, 3.0, 1.0));
  EXPECT_TRUE(contains(poly, 1.0, 3.0));
  EXPECT_FALSE(contains(poly, 3.0, 3.0));
  EXPECT_FALSE(contains(poly, 5.0, 1.0));
}

TEST(Mask, ValidatesShapes) {
  EXPECT_THROW(validate(MaskShape{MaskRect{0, 0, 0, 1}}), ContractError);
  EXPECT_THROW(validate(MaskShape{MaskEllipse{0, 0, 1, -1}}), ContractError);
  EXPECT_THROW(validate(MaskShape{MaskPolygon{{{0, 0}, {1, 1}}}}), ContractError);
  RawFrame f(4, 4, BayerPattern::rggb, 1);
  EXPECT_THROW(apply_mask(f, {}), ContractError);
}

TEST(Mask, KeepsWholeTiles) {
  RawFrame f(6, 4, BayerPattern::rggb, 7);
  // Covers tile centers (1,1) and (3,1) but only pixel column 4 of the third tile.
  apply_mask(f, {MaskRect{0.0, 0.0, 4.5, 2.0}});
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 6; ++x) EXPECT_EQ(f(x, y), (y < 2 && x < 4) ? 7 : 0) << x << "," << y;
  }
}

TEST(Mask, PixelModeAndUnion) {
  AnalogFrame f(4, 2, BayerPattern::none, 2.5);
  apply_mask(f, {MaskRect{0.0, 0.0, 1.0, 1.0}, MaskRect{3.0, 1.0, 1.0, 1.0}}, false);
  EXPECT_EQ(f.data, (std::vector<double>{2.5, 0, 0, 0, 0, 0, 0, 2.5}));
}

TEST(Mask, ImageBuffers) {
  ImageBuffer rgb(2, 1, 3, 16);
  rgb.samples = {1, 2, 3, 4, 5, 6};
  apply_mask(rgb, {MaskRect{1.0, 0.0, 1.0, 1.0}});
  EXPECT_EQ(rgb.samples, (std::vector<std::uint16_t>{0, 0, 0, 4, 5, 6}));

  ImageBuffer mosaic(4, 2, 1, 16);
  mosaic.samples = {1, 2, 3, 4, 5, 6, 7, 8};
  apply_mask(mosaic, {MaskEllipse{3.0, 1.0, 0.5, 0.5}});
  EXPECT_EQ(mosaic.samples, (std::vector<std::uint16_t>{0, 0, 3, 4, 0, 0, 7, 8}));

  ImageBuffer odd(3, 2, 1, 16);
  odd.samples = {1, 1, 1, 1, 1, 1};
  EXPECT_THROW(apply_mask(odd, {MaskRect{0, 0, 1, 1}}), ContractError);
  EXPECT_EQ(odd.samples.size(), 6u);
}
