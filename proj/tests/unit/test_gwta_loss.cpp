#include <doctest.h>

#include <cmath>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "lsc/gwta_loss.hpp"

using namespace lsc;

namespace {

ScoreGridSet logits_to_scores(ScoreGridSet logits) {
  for (auto& g : logits) softmax_channels(g);
  return logits;
}

}  // namespace

TEST_CASE("pixel loss examples") {
  const std::vector<double> ones4{1, 1, 1, 1};
  CHECK(pixel_loss(std::vector<double>{0, 1, 0, 0}, 1, ones4) == 0.0);
  CHECK(pixel_loss(std::vector<double>{0.5, 0.25, 0.25}, 1, std::vector<double>{1, 2, 1}) ==
        doctest::Approx(2.77259).epsilon(1e-5));
  CHECK(pixel_loss(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 0, ones4) ==
        doctest::Approx(1.38629).epsilon(1e-5));
  // the floor keeps a zero probability finite
  CHECK(pixel_loss(std::vector<double>{1, 0}, 1, std::vector<double>{1, 1}) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("branch and combined loss") {
  const auto frame = ImageFrame::padded_to(32, 32);
  auto labels = make_label_grids(frame, 1);  // 2x2 at stride 16
  ScoreGrid uniform(4, 2, 2, 0.25);
  const std::vector<double> ones{1, 1, 1, 1};
  CHECK(branch_loss(uniform, labels.scales[0], ones) == doctest::Approx(std::log(4.0)));

  const auto perfect = one_hot_scores(labels, 3);
  CHECK(branch_loss(perfect[0], labels.scales[0], ones) == 0.0);

  ScoreGrid one(4, 1, 1, 0.25);
  LabelGrid one_label(1, 1, 2);
  CHECK(branch_loss(one, one_label, ones) == pixel_loss(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2, ones));

  ScoreGrid wrong(4, 3, 3, 0.25);
  CHECK_THROWS_AS(branch_loss(wrong, labels.scales[0], ones), Error);

  // additivity over scales, and n_scales = 1 reduces to the branch loss
  SplitMix64 rng(4);
  const auto lab2 = testgen::random_labels(rng, frame, 2, 3, 0.3);
  const auto sc2 = testgen::random_scores(rng, lab2, 3);
  const auto w = testgen::random_weights(rng, 2, 3);
  CHECK(combined_loss(sc2, lab2, w) == doctest::Approx(branch_loss(sc2[0], lab2.scales[0], w.scale(0)) +
                                                        branch_loss(sc2[1], lab2.scales[1], w.scale(1))));
  LabelGridSet lab1{frame, {lab2.scales[0]}};
  CHECK(combined_loss(ScoreGridSet{sc2[0]}, lab1, w) == branch_loss(sc2[0], lab2.scales[0], w.scale(0)));
  CHECK(combined_loss(one_hot_scores(lab2, 3), lab2, w) == 0.0);
}

TEST_CASE("branch loss with unit weights is textbook cross entropy") {
  SplitMix64 rng(19);
  const auto frame = ImageFrame::padded_to(48, 32);
  const auto labels = testgen::random_labels(rng, frame, 1, 3, 0.5);
  const auto scores = testgen::random_scores(rng, labels, 3);
  double ce = 0.0;
  const auto& g = labels.scales[0];
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) ce -= std::log(scores[0].at(g.at(x, y), x, y));
  }
  ce /= static_cast<double>(g.size());
  CHECK(branch_loss(scores[0], g, std::vector<double>{1, 1, 1, 1}) == doctest::Approx(ce).epsilon(1e-14));
}

TEST_CASE("winner selection") {
  Grid<double> cells(2, 2);
  cells.at(0, 0) = 1.0;
  cells.at(1, 0) = 3.0;
  cells.at(0, 1) = 2.0;
  cells.at(1, 1) = 0.5;
  CHECK(gwta_winner(cells, 14, 14) == CellCorner{14, 0});
  CHECK(gwta_winner(Grid<double>(1, 1, 5.0), 14, 14) == CellCorner{0, 0});
  CHECK(gwta_winner(Grid<double>(4, 4, 2.0), 7, 9) == CellCorner{0, 0});
  Grid<double> tie(3, 3, 0.0);
  tie.at(2, 0) = 1.0;
  tie.at(0, 1) = 1.0;
  CHECK(gwta_winner(tie, 5, 5) == CellCorner{10, 0});
}

TEST_CASE("cell losses") {
  SplitMix64 rng(23);
  const auto frame = ImageFrame::padded_to(64, 64);  // w0 = h0 = 4
  const auto labels = testgen::random_labels(rng, frame, 4, 3);
  const auto scores = testgen::random_scores(rng, labels, 3);
  const auto w = testgen::random_weights(rng, 4, 3);
  const auto cells = gwta_cell_losses(scores, labels, w);
  CHECK(cells.cell_width == 4);
  CHECK(cells.cell_height == 4);
  for (int s = 0; s < 4; ++s) CHECK(cells.scales[s].size() == (std::size_t{1} << (2 * s)));
  // single-cell identity at scale 0
  CHECK(cells.scales[0].at(0, 0) ==
        doctest::Approx(16.0 * branch_loss(scores[0], labels.scales[0], w.scale(0))).epsilon(1e-14));

  // perfect predictions give zero everywhere
  const auto zero = gwta_cell_losses(one_hot_scores(labels, 3), labels, w);
  for (const auto& g : zero.scales) {
    for (double v : g.cells()) CHECK(v == 0.0);
  }

  // loss confined to the top-right quadrant of scale 1 (8x8 map, 4x4 cells)
  auto perfect = one_hot_scores(labels, 3);
  for (int y = 0; y < 4; ++y) {
    for (int x = 4; x < 8; ++x) {
      for (int c = 0; c < 4; ++c) perfect[1].at(c, x, y) = 0.25;
    }
  }
  const auto quad = gwta_cell_losses(perfect, labels, w);
  CHECK(quad.scales[1].at(1, 0) > 0.0);
  CHECK(quad.scales[1].at(0, 0) == 0.0);
  CHECK(quad.scales[1].at(0, 1) == 0.0);
  CHECK(quad.scales[1].at(1, 1) == 0.0);
  double expect = 0.0;
  for (int y = 0; y < 4; ++y) {
    for (int x = 4; x < 8; ++x) expect += -w.at(1, labels.scales[1].at(x, y)) * std::log(0.25);
  }
  CHECK(quad.scales[1].at(1, 0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("ragged grids keep every pixel in one cell") {
  SplitMix64 rng(29);
  const auto frame = ImageFrame::padded_to(80, 48);  // 5x3 coarsest -> 10x6 at scale 1
  const auto labels = testgen::random_labels(rng, frame, 2, 2);
  const auto scores = testgen::random_scores(rng, labels, 2);
  const auto w = testgen::random_weights(rng, 2, 2);
  const auto cells = gwta_cell_losses(scores, labels, w);
  CHECK(cells.scales[1].width() == 2);
  CHECK(cells.scales[1].height() == 2);
  double total = 0.0;
  for (double v : cells.scales[1].cells()) total += v;
  CHECK(total == doctest::Approx(60.0 * branch_loss(scores[1], labels.scales[1], w.scale(1))).epsilon(1e-13));
}

TEST_CASE("winner-cell loss matches exhaustive enumeration") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int ns = 1 + static_cast<int>(rng.below(4));
    const int nb = 1 + static_cast<int>(rng.below(3));
    const auto frame = ImageFrame::padded_to(16 * (1 + static_cast<int>(rng.below(5))) - static_cast<int>(rng.below(8)),
                                             16 * (1 + static_cast<int>(rng.below(5))));
    const auto labels = testgen::random_labels(rng, frame, ns, nb, 0.2);
    const auto scores = testgen::random_scores(rng, labels, nb);
    const auto w = testgen::random_weights(rng, ns, nb);
    std::vector<CellCorner> winners;
    const double expect = oracle::brute_force_wta(scores, labels, w, &winners);
    const auto report = gwta_loss(scores, labels, w);
    REQUIRE(report.l_wta == doctest::Approx(expect).epsilon(1e-12));
    REQUIRE(report.winners == winners);
    CHECK(report.l_comb == doctest::Approx(combined_loss(scores, labels, w)).epsilon(1e-12));
  }
}

TEST_CASE("winner-cell loss special cases") {
  SplitMix64 rng(37);
  const auto frame = ImageFrame::padded_to(64, 48);
  const auto labels = testgen::random_labels(rng, frame, 3, 3);
  const auto w = testgen::random_weights(rng, 3, 3);
  const auto perfect = gwta_loss(one_hot_scores(labels, 3), labels, w);
  CHECK(perfect.l_wta == 0.0);
  CHECK(perfect.winners == std::vector<CellCorner>(3, CellCorner{0, 0}));

  // one scale: the winner-cell loss is the weighted branch mean
  LabelGridSet one{frame, {labels.scales[0]}};
  const auto scores = testgen::random_scores(rng, one, 3);
  CHECK(gwta_loss(scores, one, w).l_wta == doctest::Approx(branch_loss(scores[0], one.scales[0], w.scale(0))));

  // l_comb follows the plain table when one is passed
  const auto alpha = testgen::random_weights(rng, 3, 3);
  const auto s3 = testgen::random_scores(rng, labels, 3);
  CHECK(gwta_loss(s3, labels, w, &alpha).l_comb == doctest::Approx(combined_loss(s3, labels, alpha)));
}

TEST_CASE("winner-cell gradient matches finite differences") {
  SplitMix64 rng(41);
  const auto frame = ImageFrame::padded_to(48, 32);
  for (int trial = 0; trial < 4; ++trial) {
    const auto labels = testgen::random_labels(rng, frame, 3, 3, 0.3);
    ScoreGridSet logits;
    for (const auto& g : labels.scales) {
      ScoreGrid l(4, g.width(), g.height());
      for (auto& v : l.values()) v = rng.normal();
      logits.push_back(std::move(l));
    }
    const auto w = testgen::random_weights(rng, 3, 3);
    const auto grad = gwta_logit_gradient(logits_to_scores(logits), labels, w);
    const auto report = gwta_loss(logits_to_scores(logits), labels, w);
    const auto f = [&] {
      // winners stay fixed: evaluate the same cells as the analytic pass
      const auto sc = logits_to_scores(logits);
      const auto cells = gwta_cell_losses(sc, labels, w);
      double total = 0.0;
      for (int s = 0; s < 3; ++s) {
        total += cells.scales[s].at(report.winners[s].x / cells.cell_width, report.winners[s].y / cells.cell_height);
      }
      return total / (cells.cell_width * cells.cell_height);
    };
    int checked = 0;
    for (int k = 0; k < 150; ++k) {
      const int s = static_cast<int>(rng.below(3));
      auto& v = logits[s].values()[rng.below(logits[s].values().size())];
      const std::size_t idx = static_cast<std::size_t>(&v - logits[s].values().data());
      const double numeric = oracle::central_difference(f, v, 1e-6);
      const double analytic = grad[s].values()[idx];
      if (analytic == 0.0) {
        CHECK(std::abs(numeric) < 1e-9);
      } else {
        CHECK(oracle::relative_error(analytic, numeric) < 1e-4);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("winner-cell gradient sparsity") {
  SplitMix64 rng(43);
  const auto frame = ImageFrame::padded_to(96, 64);
  const auto labels = testgen::random_labels(rng, frame, 4, 3);
  const auto scores = testgen::random_scores(rng, labels, 3);
  const auto w = testgen::random_weights(rng, 4, 3);
  const auto grad = gwta_logit_gradient(scores, labels, w);
  const auto report = gwta_loss(scores, labels, w);
  const int w0 = labels.scales[0].width();
  const int h0 = labels.scales[0].height();
  int nonzero_pixels = 0;
  for (int s = 0; s < 4; ++s) {
    const auto& g = grad[s];
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        bool any = false;
        for (int c = 0; c < 4; ++c) any = any || g.at(c, x, y) != 0.0;
        const bool inside = x >= report.winners[s].x && x < report.winners[s].x + w0 &&
                            y >= report.winners[s].y && y < report.winners[s].y + h0;
        if (!inside) CHECK_FALSE(any);
        nonzero_pixels += any;
      }
    }
  }
  CHECK(nonzero_pixels <= 4 * w0 * h0);
  // perfect predictions give a zero gradient
  for (const auto& g : gwta_logit_gradient(one_hot_scores(labels, 3), labels, w)) {
    for (double v : g.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("combined-loss gradient matches finite differences") {
  SplitMix64 rng(47);
  const auto frame = ImageFrame::padded_to(32, 32);
  const auto labels = testgen::random_labels(rng, frame, 2, 2, 0.4);
  ScoreGridSet logits;
  for (const auto& g : labels.scales) {
    ScoreGrid l(3, g.width(), g.height());
    for (auto& v : l.values()) v = rng.normal();
    logits.push_back(std::move(l));
  }
  const auto w = testgen::random_weights(rng, 2, 2);
  const auto grad = combined_logit_gradient(logits_to_scores(logits), labels, w);
  const auto f = [&] { return combined_loss(logits_to_scores(logits), labels, w); };
  for (int s = 0; s < 2; ++s) {
    for (std::size_t i = 0; i < logits[s].values().size(); ++i) {
      const double numeric = oracle::central_difference(f, logits[s].values()[i], 1e-6);
      CHECK(oracle::relative_error(grad[s].values()[i], numeric) < 1e-4);
    }
  }
}
