#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "faircrop/crop.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace faircrop;

namespace {

SaliencyMap two_cell(double a, double b) { return SaliencyMap(2, 1, 20, 10, {a, b}); }

}  // namespace

TEST(AspectRatio, ParsesAndRejects) {
  EXPECT_EQ(AspectRatio::parse("16:9"), AspectRatio(16, 9));
  EXPECT_THROW(AspectRatio::parse("16x9"), InvalidArgument);
  EXPECT_THROW(AspectRatio::parse("0:1"), InvalidArgument);
  EXPECT_THROW(AspectRatio::parse(":4"), InvalidArgument);
  EXPECT_THROW(AspectRatio::parse("-1:4"), InvalidArgument);
}

TEST(CropAroundFocal, CenteredSquare) {
  EXPECT_EQ(crop_around_focal(1000, 500, {500, 250}, {1, 1}), (CropRect{250, 0, 500, 500}));
}

TEST(CropAroundFocal, ClampedAtLeftEdge) {
  EXPECT_EQ(crop_around_focal(1000, 500, {10, 250}, {1, 1}), (CropRect{0, 0, 500, 500}));
}

TEST(CropAroundFocal, ClampedAtBottom) {
  EXPECT_EQ(crop_around_focal(500, 1000, {250, 980}, {1, 1}), (CropRect{0, 500, 500, 500}));
}

TEST(CropAroundFocal, MatchingRatioKeepsWholeImage) {
  EXPECT_EQ(crop_around_focal(1600, 900, {3, 3}, {16, 9}), (CropRect{0, 0, 1600, 900}));
}

TEST(CropAroundFocal, RejectsFocalOutsideImage) {
  EXPECT_THROW(crop_around_focal(100, 100, {100, 5}, {1, 1}), InvalidArgument);
  EXPECT_THROW(crop_around_focal(100, 100, {-1, 5}, {1, 1}), InvalidArgument);
}

TEST(CropSize, NearlyMatchingRatioStillCropsOnePixel) {
  const CropSize s = crop_size(100, 100, {1001, 1000});
  EXPECT_EQ(s.w, 100);
  EXPECT_EQ(s.h, 99);
}

TEST(CropSize, ZeroSizedCropIsAnError) {
  EXPECT_THROW(crop_size(3, 1, {1, 9}), InvalidArgument);
}

// Brute force: among every in-bounds placement of the crop size, the one
// whose start is nearest focal - size/2; ties cannot occur for a 1-D clamp.
TEST(CropAroundFocal, MatchesExhaustivePlacementSearch) {
  Rng rng(41);
  for (int t = 0; t < 300; ++t) {
    const int w = 2 + static_cast<int>(rng.uniform_index(120));
    const int h = 2 + static_cast<int>(rng.uniform_index(120));
    const AspectRatio ar(1 + static_cast<int>(rng.uniform_index(5)), 1 + static_cast<int>(rng.uniform_index(5)));
    const Point f{static_cast<int>(rng.uniform_index(w)), static_cast<int>(rng.uniform_index(h))};
    CropSize size;
    try {
      size = crop_size(w, h, ar);
    } catch (const InvalidArgument&) {
      continue;
    }
    const CropRect got = crop_around_focal(w, h, f, ar);
    auto best_start = [](int focal, int len, int total) {
      int best = 0;
      for (int s = 0; s + len <= total; ++s)
        if (std::abs(s - (focal - len / 2)) < std::abs(best - (focal - len / 2))) best = s;
      return best;
    };
    EXPECT_EQ(got, (CropRect{best_start(f.x, size.w, w), best_start(f.y, size.h, h), size.w, size.h}));
  }
}

TEST(CropGeometry, RandomizedProperties) {
  Rng rng(2024);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const int w = 1 + static_cast<int>(rng.uniform_index(4000));
    const int h = 1 + static_cast<int>(rng.uniform_index(4000));
    const AspectRatio ar(1 + static_cast<int>(rng.uniform_index(32)), 1 + static_cast<int>(rng.uniform_index(32)));
    const Point f{static_cast<int>(rng.uniform_index(w)), static_cast<int>(rng.uniform_index(h))};
    CropRect r;
    try {
      r = crop_around_focal(w, h, f, ar);
    } catch (const InvalidArgument&) {
      // Only legal when the exact crop would be under half a pixel wide.
      const double exact_w = static_cast<double>(h) * ar.num / ar.den;
      const double exact_h = static_cast<double>(w) * ar.den / ar.num;
      EXPECT_TRUE(exact_w < 0.5 || exact_h < 0.5) << w << "x" << h << " " << ar.to_string();
      continue;
    }
    ++checked;
    EXPECT_GE(r.x, 0);
    EXPECT_GE(r.y, 0);
    EXPECT_LE(r.x + r.w, w);
    EXPECT_LE(r.y + r.h, h);
    EXPECT_TRUE(r.contains(f));
    const bool same_ratio = static_cast<std::int64_t>(ar.num) * h == static_cast<std::int64_t>(ar.den) * w;
    if (same_ratio) {
      EXPECT_EQ(r, (CropRect{0, 0, w, h}));
    } else {
      EXPECT_NE(r.w == w, r.h == h) << "exactly one dimension must be cropped";
      // The cropped side is within one pixel of exact: half a pixel of
      // rounding plus the shrink that keeps it below the source size.
      if (r.h == h)
        EXPECT_LE(std::abs(static_cast<std::int64_t>(r.w) * ar.den - static_cast<std::int64_t>(h) * ar.num), ar.den);
      else
        EXPECT_LE(std::abs(static_cast<std::int64_t>(r.h) * ar.num - static_cast<std::int64_t>(w) * ar.den), ar.num);
    }
  }
  EXPECT_GT(checked, 900);
}

TEST(CenterCrop, IsCentered) {
  EXPECT_EQ(center_crop(1000, 500, {1, 1}), (CropRect{250, 0, 500, 500}));
  EXPECT_EQ(center_crop(101, 50, {1, 1}), (CropRect{25, 0, 50, 50}));
}

TEST(PadToAspect, TallCanvas) {
  const auto p = pad_to_aspect(400, 200, {1, 2});
  EXPECT_EQ(p.canvas_w, 400);
  EXPECT_EQ(p.canvas_h, 800);
  EXPECT_EQ(p.offset_x, 0);
  EXPECT_EQ(p.offset_y, 300);
}

TEST(PadToAspect, MatchingRatioIsIdentity) {
  const auto p = pad_to_aspect(400, 200, {2, 1});
  EXPECT_EQ(p.canvas_w, 400);
  EXPECT_EQ(p.canvas_h, 200);
  EXPECT_EQ(p.offset_x, 0);
  EXPECT_EQ(p.offset_y, 0);
}

TEST(PadToAspect, SquareCanvas) {
  const auto p = pad_to_aspect(300, 100, {1, 1});
  EXPECT_EQ(p.canvas_w, 300);
  EXPECT_EQ(p.canvas_h, 300);
  EXPECT_EQ(p.offset_x, 0);
  EXPECT_EQ(p.offset_y, 100);
}

TEST(PadToAspect, KeepsEverySourcePixel) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const int w = 1 + static_cast<int>(rng.uniform_index(40));
    const int h = 1 + static_cast<int>(rng.uniform_index(40));
    const AspectRatio ar(1 + static_cast<int>(rng.uniform_index(9)), 1 + static_cast<int>(rng.uniform_index(9)));
    const auto img = fixtures::random_image(w, h, t);
    const Rgb pad{1, 2, 3};
    const auto spec = pad_to_aspect(w, h, ar, pad);
    const auto out = render_crop(img, spec);
    ASSERT_EQ(out.width(), spec.canvas_w);
    ASSERT_EQ(out.height(), spec.canvas_h);
    EXPECT_GE(spec.canvas_w, w);
    EXPECT_GE(spec.canvas_h, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) ASSERT_EQ(out.at(x + spec.offset_x, y + spec.offset_y), img.at(x, y));
    EXPECT_EQ(out.at(spec.canvas_w - 1, spec.canvas_h - 1) == pad,
              spec.canvas_w > spec.offset_x + w || spec.canvas_h > spec.offset_y + h);
  }
}

TEST(RenderCrop, ExtractsRectangle) {
  const auto img = fixtures::random_image(30, 20, 9);
  const auto out = render_crop(img, CropRect{5, 4, 10, 12});
  ASSERT_EQ(out.width(), 10);
  ASSERT_EQ(out.height(), 12);
  EXPECT_EQ(out.at(0, 0), img.at(5, 4));
  EXPECT_EQ(out.at(9, 11), img.at(14, 15));
}

TEST(SelectFocal, ArgmaxAlwaysPicksTheLargerCell) {
  const auto map = two_cell(0.51, 0.49);
  for (int t = 0; t < 100; ++t) EXPECT_EQ(select_focal(map, Argmax{}), map.cell_point(0, 0));
}

TEST(SelectFocal, ArgmaxInvariantUnderRescaling) {
  const auto map = fixtures::random_map(17, 11, 3);
  for (double f : {1e-6, 0.5, 3.0, 1e6}) EXPECT_EQ(select_focal(map.scaled(f), Argmax{}), select_focal(map, Argmax{}));
}

TEST(SelectFocal, SamplingIsReproduciblePerSeed) {
  const auto map = fixtures::random_map(12, 9, 4);
  for (std::uint64_t s = 0; s < 50; ++s)
    EXPECT_EQ(select_focal(map, Sampling{s}), select_focal(map, Sampling{s}));
}

TEST(SelectFocal, SamplingFrequencyOfTwoCellMap) {
  const auto map = two_cell(0.51, 0.49);
  int first = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) first += select_focal(map, Sampling{s}) == map.cell_point(0, 0);
  EXPECT_NEAR(first / 10000.0, 0.51, 0.02);
}

// Chi-square goodness of fit with 7 degrees of freedom; 24.32 is the 0.999 quantile.
TEST(SelectFocal, SamplingFollowsNormalizedScores) {
  const std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8};
  const SaliencyMap map(8, 1, 80, 10, s);
  const CellSampler sampler(map);
  std::vector<int> counts(8, 0);
  const int n = 10000;
  for (int t = 0; t < n; ++t) ++counts[sampler.draw(derive_seed(77, t))];
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  double chi2 = 0.0;
  for (int k = 0; k < 8; ++k) {
    const double expected = n * s[k] / total;
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  EXPECT_LT(chi2, 24.32);
}

TEST(SelectFocal, SamplingNeverPicksZeroCells) {
  const SaliencyMap map(5, 1, 50, 10, {0, 1, 0, 0, 2});
  const CellSampler sampler(map);
  for (int t = 0; t < 2000; ++t) {
    const auto k = sampler.draw(t);
    EXPECT_TRUE(k == 1 || k == 4);
  }
}

TEST(SelectFocal, SoftmaxFavorsPeakAtLowTemperature) {
  const SaliencyMap map(3, 1, 30, 10, {0.2, 1.0, 0.5});
  Sampling s{0, SamplingWeights::Softmax, 0.01};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    s.seed = seed;
    EXPECT_EQ(select_focal(map, s), map.cell_point(1, 0));
  }
}

TEST(SelectFocal, SamplingAllZeroMapIsAnError) {
  EXPECT_THROW(select_focal(SaliencyMap(3, 3, 30, 30, std::vector<double>(9, 0.0)), Sampling{1}), InvalidArgument);
}

TEST(SelectFocal, WeightedAverageOfTwoEqualPeaksIsTheMidpoint) {
  std::vector<double> s(100, 0.0);
  s[10] = 1.0;
  s[90] = 1.0;
  EXPECT_EQ(select_focal(SaliencyMap::from_grid(100, 1, s), WeightedAverage{}), (Point{50, 0}));

  std::vector<double> coarse(10 * 3, 0.0);
  coarse[10 + 1] = 4.0;  // centre (15, 15) on a 100x30 source
  coarse[10 + 8] = 4.0;  // centre (85, 15)
  EXPECT_EQ(select_focal(SaliencyMap(10, 3, 100, 30, coarse), WeightedAverage{}), (Point{50, 15}));
}

TEST(SelectFocal, WeightedAverageOfOneCellIsItsPoint) {
  const auto map = fixtures::random_map(9, 7, 12, 97, 61);
  for (std::size_t c = 0; c < map.size(); c += 5) {
    std::vector<double> s(map.size(), 0.0);
    s[c] = 2.0;
    const SaliencyMap one(9, 7, 97, 61, s);
    EXPECT_EQ(select_focal(one, WeightedAverage{}), one.cell_point(one.cell_of_index(c)));
  }
}

TEST(SelectFocal, WeightedAverageLandsOnLowSaliency) {
  std::vector<double> s(10 * 3, 0.0);
  s[10 + 1] = 4.0;
  s[10 + 8] = 4.0;
  const SaliencyMap map(10, 3, 100, 30, s);
  const Point p = select_focal(map, WeightedAverage{});
  EXPECT_EQ(map.at(map.cell_at_pixel(p)), 0.0);
}

TEST(SelectFocal, TopKAverageIsUnweightedCentroidOfPeaks) {
  std::vector<double> s(10 * 10, 0.01);
  s[2 * 10 + 1] = 9.0;  // cell (1,2) -> pixel (15,25)
  s[7 * 10 + 8] = 7.0;  // cell (8,7) -> pixel (85,75)
  const SaliencyMap map(10, 10, 100, 100, s);
  EXPECT_EQ(select_focal(map, TopKAverage{2, 20.0}), (Point{50, 50}));
  EXPECT_EQ(select_focal(map, TopKAverage{1, 20.0}), (Point{15, 25}));
}

TEST(SelectFocal, UserFocalIsReturnedUnchangedAndValidated) {
  const auto map = fixtures::random_map(4, 4, 1);
  EXPECT_EQ(select_focal(map, UserFocal{{3, 30}}), (Point{3, 30}));
  EXPECT_THROW(select_focal(map, UserFocal{{32, 0}}), InvalidArgument);
}

TEST(SelectFocal, PadNoCropHasNoFocalPoint) {
  EXPECT_THROW(select_focal(fixtures::random_map(4, 4, 1), PadNoCrop{}), InvalidArgument);
}

TEST(ParseStrategy, AcceptsEveryForm) {
  EXPECT_TRUE(std::holds_alternative<Argmax>(parse_strategy("argmax")));
  EXPECT_EQ(std::get<Sampling>(parse_strategy("sample:12")).seed, 12u);
  EXPECT_EQ(std::get<Sampling>(parse_strategy("sample", 5)).seed, 5u);
  EXPECT_TRUE(std::holds_alternative<WeightedAverage>(parse_strategy("average")));
  EXPECT_EQ(std::get<TopKAverage>(parse_strategy("topk:4")).k, 4);
  EXPECT_EQ(std::get<UserFocal>(parse_strategy("focal:3,9")).point, (Point{3, 9}));
  EXPECT_EQ(std::get<PadNoCrop>(parse_strategy("pad:1,2,3")).pad, (Rgb{1, 2, 3}));
  for (const char* bad : {"argmax:1", "topk", "topk:0", "focal:1", "pad:1,2", "pad:1,2,300", "best"})
    EXPECT_THROW(parse_strategy(bad), InvalidArgument) << bad;
}

TEST(Exposure, ArgmaxAmplifiesSmallGap) {
  const auto r = exposure_experiment(two_cell(0.51, 0.49), 10000, 123);
  EXPECT_EQ(r.argmax, (std::vector<double>{1.0, 0.0}));
  EXPECT_NEAR(r.sampling[0], 0.51, 0.02);
  EXPECT_NEAR(r.sampling[1], 0.49, 0.02);
  EXPECT_DOUBLE_EQ(r.sampling[0] + r.sampling[1], 1.0);
}

TEST(Exposure, EqualScoresStillGiveTotalExposure) {
  const auto r = exposure_experiment(two_cell(0.5, 0.5), 1000, 1);
  EXPECT_EQ(r.argmax, (std::vector<double>{1.0, 0.0}));
}

TEST(Exposure, SingleCell) {
  const auto r = exposure_experiment(SaliencyMap(1, 1, 5, 5, {0.3}), 100, 1);
  EXPECT_EQ(r.argmax, std::vector<double>{1.0});
  EXPECT_EQ(r.sampling, std::vector<double>{1.0});
}

TEST(Exposure, AllZeroMapIsAnError) {
  EXPECT_THROW(exposure_experiment(two_cell(0, 0), 10, 1), InvalidArgument);
}

TEST(CropPipeline, SolidImageGivesCenterCrops) {
  const std::vector<AspectRatio> ars{{1, 1}, {16, 9}, {4, 5}};
  const auto img = fixtures::solid(120, 80, 128);
  for (const auto& backend : std::vector<SaliencyBackend>{LuminanceContrast{}, SpectralResidual{}}) {
    const auto r = crop_pipeline(img, backend, Argmax{}, ars);
    EXPECT_TRUE(r.symmetric);
    EXPECT_FALSE(r.focal.has_value());
    ASSERT_EQ(r.crops.size(), 3u);
    for (std::size_t k = 0; k < ars.size(); ++k)
      EXPECT_EQ(std::get<CropRect>(r.crops[k]), center_crop(120, 80, ars[k]));
  }
}

TEST(CropPipeline, SymmetricImageIgnoresStrategy) {
  const std::vector<AspectRatio> ars{{1, 1}, {16, 9}};
  const auto img = fixtures::mirror_symmetric_image(64, 48, 8);
  const std::vector<CropStrategy> strategies{Argmax{}, Sampling{3}, WeightedAverage{}, TopKAverage{3, {}},
                                             UserFocal{{1, 1}}};
  for (const auto& s : strategies) {
    const auto r = crop_pipeline(img, LuminanceContrast{}, s, ars);
    ASSERT_TRUE(r.symmetric) << strategy_name(s);
    for (std::size_t k = 0; k < ars.size(); ++k)
      EXPECT_EQ(std::get<CropRect>(r.crops[k]), center_crop(64, 48, ars[k])) << strategy_name(s);
  }
}

TEST(CropPipeline, TwoFigureCompositeCropsAroundStrongerFigure) {
  // Two textured blobs; the right one has the larger luma swing.
  ImageBuffer img(200, 100, Rgb{40, 40, 40});
  for (int y = 30; y < 70; ++y)
    for (int x = 0; x < 40; ++x) {
      const bool on = (x / 4 + y / 4) % 2 == 0;
      img.set(20 + x, y, on ? Rgb{90, 90, 90} : Rgb{40, 40, 40});
      img.set(140 + x, y, on ? Rgb{250, 250, 250} : Rgb{0, 0, 0});
    }
  const std::vector<AspectRatio> ars{{1, 1}, {4, 5}, {1, 2}};
  const auto r = crop_pipeline(img, LuminanceContrast{}, Argmax{}, ars);
  ASSERT_FALSE(r.symmetric);
  ASSERT_TRUE(r.focal.has_value());
  const std::size_t best = oracle::argmax({r.map->scores().begin(), r.map->scores().end()});
  EXPECT_EQ(*r.focal, r.map->cell_point(r.map->cell_of_index(best)));
  EXPECT_GE(r.focal->x, 140 - 8);
  EXPECT_LT(r.focal->x, 180 + 8);
  for (const auto& spec : r.crops) EXPECT_TRUE(std::get<CropRect>(spec).contains(*r.focal));
}

TEST(CropPipeline, PadNoCropSkipsSaliency) {
  const auto r = crop_pipeline(fixtures::solid(40, 20, 1), ExternalMap{"/nonexistent.pfm"}, PadNoCrop{},
                               {{1, 1}, {16, 9}});
  EXPECT_FALSE(r.map.has_value());
  ASSERT_EQ(r.crops.size(), 2u);
  EXPECT_EQ(std::get<PaddedCanvas>(r.crops[0]).canvas_h, 40);
  EXPECT_EQ(std::get<PaddedCanvas>(r.crops[1]), (PaddedCanvas{40, 23, 0, 1, kBlack}));
}

TEST(CropPipeline, NoAspectRatiosIsAnError) {
  EXPECT_THROW(crop_pipeline(fixtures::solid(4, 4, 1), LuminanceContrast{}, Argmax{}, {}), InvalidArgument);
}
