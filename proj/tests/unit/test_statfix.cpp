// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "fdmimo/statfix.hpp"

using namespace fdmimo;

namespace {

const Codebook& book() {
  static const Codebook cb(BeamConfig{}, 4);
  return cb;
}

ParamHistory history(std::vector<int> pmi, std::vector<int> clsm_cqi, std::vector<int> fixed_cqi) {
  ParamHistory h;
  h.q = 0;
  for (int p : pmi) h.rank.push_back(book().at(p).rank);
  h.pmi = std::move(pmi);
  h.clsm_cqi = std::move(clsm_cqi);
  h.fixed_cqi = std::move(fixed_cqi);
  return h;
}

LocatedParams located(std::uint32_t q, double x, double y, int pmi, int cqi) {
  LocatedParams lp;
  lp.location.q = q;
  lp.location.coords = {x, y, 2.0};
  lp.params.W = book().at(pmi).W;
  lp.params.rank = book().at(pmi).rank;
  lp.params.pmi = pmi;
  lp.params.cqi = cqi;
  return lp;
}

}  // namespace

TEST(Mode, MostFrequentWithSmallestTieBreak) {
  EXPECT_EQ(mode_of(std::vector<int>{7, 7, 9}), 7);
  EXPECT_EQ(mode_of(std::vector<int>{3, 5}), 3);
  EXPECT_EQ(mode_of(std::vector<int>{5, 3}), 3);
  EXPECT_EQ(mode_of(std::vector<int>{4}), 4);
  EXPECT_THROW(mode_of(std::vector<int>{}), std::invalid_argument);
}

TEST(StatFix, PmiModeAndVariantCqis) {
  const auto h = history({7, 7, 9}, {3, 5, 5}, {4, 5, 5});
  const auto v1 = fix_codebook_params(h, book(), 1);
  EXPECT_EQ(*v1.pmi, 7);
  EXPECT_EQ(v1.rank, 1);
  EXPECT_EQ(v1.cqi, 5);
  EXPECT_EQ((v1.W - book().at(7).W).norm(), 0.0);
  EXPECT_EQ(fix_codebook_params(history({7, 7, 9}, {3, 5, 3}, {4, 4, 6}), book(), 2).cqi, 4);
}

TEST(StatFix, VariantOneTieGoesToSmallestCqi) {
  EXPECT_EQ(fix_codebook_params(history({1, 1}, {3, 5}, {9, 9}), book(), 1).cqi, 3);
}

TEST(StatFix, VariantThreeRoundsMean) {
  EXPECT_EQ(fix_codebook_params(history({2, 2, 2, 2}, {1, 1, 1, 1}, {4, 5, 5, 5}), book(), 3).cqi, 5);
  EXPECT_EQ(fix_codebook_params(history({2, 2}, {1, 1}, {4, 5}), book(), 3).cqi, 5);
  EXPECT_EQ(fix_codebook_params(history({2, 2, 2}, {1, 1, 1}, {4, 4, 5}), book(), 3).cqi, 4);
}

TEST(StatFix, PermutationInvariant) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> pmi(0, 319), cqi(1, 15);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> p, c1, c2;
    for (int t = 0; t < 12; ++t) {
      p.push_back(pmi(rng) % 6 * 37);
      c1.push_back(cqi(rng));
      c2.push_back(cqi(rng));
    }
    const auto h = history(p, c1, c2);
    std::vector<int> order(12);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> ps, cs1, cs2;
    for (int i : order) {
      ps.push_back(p[i]);
      cs1.push_back(c1[i]);
      cs2.push_back(c2[i]);
    }
    const auto hs = history(ps, cs1, cs2);
    for (int v = 1; v <= 3; ++v) {
      const auto a = fix_codebook_params(h, book(), v);
      const auto b = fix_codebook_params(hs, book(), v);
      EXPECT_EQ(*a.pmi, *b.pmi);
      EXPECT_EQ(a.cqi, b.cqi);
      EXPECT_NO_THROW(a.validate());
    }
  }
}

TEST(StatFix, Errors) {
  EXPECT_THROW(fix_codebook_params(ParamHistory{}, book(), 1), std::invalid_argument);
  EXPECT_THROW(fix_codebook_params(history({1}, {1}, {1}), book(), 4), std::invalid_argument);
}

TEST(NearestNeighbor, CoincidentQueryAndTieBreak) {
  const std::vector<LocatedParams> train{located(2, 0.0, 0.0, 10, 4), located(5, 2.0, 0.0, 20, 9)};
  Location q;
  q.coords = {2.0, 0.0, 2.0};
  EXPECT_EQ(*nearest_neighbor_infer(train, q).pmi, 20);
  q.coords = {1.0, 0.0, 2.0};
  EXPECT_EQ(*nearest_neighbor_infer(train, q).pmi, 10);
  const std::vector<LocatedParams> reversed{train[1], train[0]};
  EXPECT_EQ(*nearest_neighbor_infer(reversed, q).pmi, 10);
  EXPECT_THROW(nearest_neighbor_infer(std::vector<LocatedParams>{}, q), std::invalid_argument);
}

TEST(NearestNeighbor, MatchesLinearScan) {
  std::vector<LocatedParams> train;
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) train.push_back(located(r * 5 + c, 3.0 * c, 3.0 * r, (r * 5 + c) * 7, 1 + c));
  }
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-2.0, 14.0);
  for (int i = 0; i < 500; ++i) {
    Location q;
    q.coords = {u(rng), u(rng), 2.0};
    std::size_t best = 0;
    for (std::size_t j = 1; j < train.size(); ++j) {
      if (squared_distance(train[j].location, q) < squared_distance(train[best].location, q)) best = j;
    }
    const auto got = nearest_neighbor_infer(train, q);
    EXPECT_EQ(*got.pmi, *train[best].params.pmi);
    EXPECT_EQ(got.cqi, train[best].params.cqi);
  }
  for (const auto& lp : train) EXPECT_EQ(*nearest_neighbor_infer(train, lp.location).pmi, *lp.params.pmi);
}

TEST(FixedTable, CsvRoundTrip) {
  const std::vector<LocatedParams> table{located(0, 0, 0, 3, 4), located(4, 1, 1, 200, 11)};
  const auto path = std::filesystem::temp_directory_path() / "fdmimo_fixed.csv";
  write_fixed_table(table, path);
  const auto back = read_fixed_table(path, book());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].location.q, 4u);
  EXPECT_EQ(*back[1].params.pmi, 200);
  EXPECT_EQ(back[1].params.rank, book().at(200).rank);
  EXPECT_EQ(back[1].params.cqi, 11);
  EXPECT_EQ((back[1].params.W - book().at(200).W).norm(), 0.0);
}
