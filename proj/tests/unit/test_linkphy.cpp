// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fdmimo/codebook.hpp"
#include "fdmimo/linkphy.hpp"
#include "fdmimo/selection.hpp"
#include "oracles.hpp"

using namespace fdmimo;

namespace {

CMatrix one(cdouble v) { return CMatrix::Constant(1, 1, v); }

double mc_f(double sinr, int m) { return oracle::mc_bicm(sinr, m, 100000, 4242); }

// Bisection on the common-random-number Monte-Carlo curve.
double mc_f_inverse(double bits, int m) {
  double lo = -20.0, hi = 40.0;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mc_f(db_to_linear(mid), m) < bits ? lo : hi) = mid;
  }
  return db_to_linear(0.5 * (lo + hi));
}

}  // namespace

TEST(Equalizer, ScalarClosedForm) {
  const auto E = mmse_equalizer(one(1.0), one(1.0), 0.1);
  EXPECT_NEAR(E(0, 0).real(), 1.0 / 1.1, 1e-15);
  EXPECT_NEAR(E(0, 0).imag(), 0.0, 1e-15);
}

TEST(Equalizer, PseudoInverseLimit) {
  std::mt19937_64 rng(1);
  const auto H = oracle::random_channel(rng, 4, 16);
  const Codebook cb(BeamConfig{}, 2);
  const CMatrix& W = cb.at(140).W;
  const CMatrix A = H * W;
  const auto E = mmse_equalizer(H, W, 1e-12);
  EXPECT_LT((E * A - CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Equalizer, MatchesNormalEquationSolve) {
  std::mt19937_64 rng(2);
  const Codebook cb(BeamConfig{}, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto H = oracle::random_channel(rng, 4, 16);
    const CMatrix& W = cb.at(128 + trial * 5).W;
    ASSERT_EQ(W.cols(), 2);
    const auto E = mmse_equalizer(H, W, 0.05);
    EXPECT_LT((E - oracle::mmse(H, W, 0.05)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Equalizer, Errors) {
  EXPECT_THROW(mmse_equalizer(CMatrix::Ones(2, 3), CMatrix::Ones(2, 1), 0.1), std::invalid_argument);
  EXPECT_THROW(mmse_equalizer(CMatrix::Ones(2, 3), CMatrix::Ones(3, 1), 0.0), std::invalid_argument);
}

TEST(Sinr, ScalarChannel) {
  const auto E = mmse_equalizer(one(1.0), one(1.0), 0.1);
  const auto s = sinr_per_layer(one(1.0), one(1.0), E, 0.1);
  EXPECT_NEAR(s(0), 10.0, 1e-12);
}

TEST(Sinr, MatchesTermByTermLoop) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto H = oracle::random_channel(rng, 4, 16);
    const auto W = oracle::random_channel(rng, 16, 2);
    const auto E = mmse_equalizer(H, W, 0.3);
    const auto got = sinr_per_layer(H, W, E, 0.3);
    const auto want = oracle::layer_sinrs(H, W, E, 0.3);
    for (int l = 0; l < 2; ++l) EXPECT_NEAR(got(l), want[l], 1e-10 * want[l]);
    const auto lit = sinr_per_layer(H, W, E, 0.3, SinrForm::Literal);
    const auto want_lit = oracle::layer_sinrs(H, W, E, 0.3, false);
    for (int l = 0; l < 2; ++l) EXPECT_NEAR(lit(l), want_lit[l], 1e-10 * want_lit[l]);
  }
}

TEST(Sinr, SvdPrecoderDiagonalizes) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto H = oracle::random_channel(rng, 4, 16);
    const auto d = svd(H);
    for (int L = 1; L <= 4; ++L) {
      const CMatrix W = d.V.leftCols(L);
      const CMatrix E = d.U.leftCols(L).adjoint();
      const CMatrix G = E * H * W;
      for (int l = 0; l < L; ++l) {
        for (int i = 0; i < L; ++i) {
          if (i != l) EXPECT_LT(std::abs(G(l, i)), 1e-10);
        }
      }
      const auto s = sinr_per_layer(H, W, E, 0.01);
      for (int l = 0; l < L; ++l) {
        const double lam = d.singular_values(l);
        EXPECT_NEAR(s(l), lam * lam / 0.01, 1e-9 * lam * lam / 0.01);
      }
    }
  }
}

TEST(Sinr, FastPathMatchesExplicitFormula) {
  std::mt19937_64 rng(5);
  for (int L = 1; L <= 4; ++L) {
    for (int trial = 0; trial < 25; ++trial) {
      const auto H = oracle::random_channel(rng, 4, 16);
      const auto W = oracle::random_channel(rng, 16, L);
      const SmallCMatrix A = H * W;
      double fast[kMaxLayers];
      mmse_layer_sinrs(A, 0.2, SinrForm::Squared, fast);
      const auto want = oracle::layer_sinrs(H, W, oracle::mmse(H, W, 0.2), 0.2);
      for (int l = 0; l < L; ++l) EXPECT_NEAR(fast[l], want[l], 1e-9 * std::max(1.0, want[l]));
    }
  }
}

TEST(Sinr, IncreasingNoiseLowersEveryLayer) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto H = oracle::random_channel(rng, 4, 16);
    const auto W = oracle::random_channel(rng, 16, 3);
    const auto lo = sinr_per_layer(H, W, mmse_equalizer(H, W, 0.1), 0.1);
    const auto hi = sinr_per_layer(H, W, mmse_equalizer(H, W, 0.2), 0.2);
    for (int l = 0; l < 3; ++l) EXPECT_LT(hi(l), lo(l));
  }
}

TEST(Bicm, ZeroAndSaturation) {
  for (int m : {2, 4, 6}) {
    EXPECT_EQ(bicm_capacity(0.0, m), 0.0);
    EXPECT_NEAR(bicm_capacity(1e6, m), m, 1e-6);
    EXPECT_LE(bicm_capacity(1e9, m), m);
  }
  EXPECT_THROW(bicm_capacity(1.0, 3), std::invalid_argument);
  EXPECT_THROW(bicm_capacity(-1.0, 2), std::invalid_argument);
}

TEST(Bicm, MatchesMonteCarlo) {
  for (int m : {2, 4, 6}) {
    for (double db : {-5.0, 0.0, 5.0, 10.0, 15.0}) {
      const double s = db_to_linear(db);
      EXPECT_NEAR(bicm_capacity(s, m), oracle::mc_bicm(s, m, 100000, 99 + m), 0.05) << "m=" << m << " dB=" << db;
    }
  }
}

TEST(Bicm, MonotoneAndBounded) {
  for (int m : {2, 4, 6}) {
    double prev = 0.0;
    for (double db = -30.0; db <= 50.0; db += 0.013) {
      const double c = bicm_capacity(db_to_linear(db), m);
      EXPECT_GE(c, prev);
      EXPECT_LE(c, m);
      prev = c;
    }
  }
}

TEST(Bicm, InverseRoundTrip) {
  for (int m : {2, 4, 6}) {
    for (double db = -15.0; db <= 20.0; db += 0.37) {
      const double x = db_to_linear(db);
      const double c = bicm_capacity(x, m);
      if (c > m - 1e-3) continue;
      EXPECT_NEAR(bicm_capacity_inverse(c, m), x, 1e-6 * x) << "m=" << m << " dB=" << db;
    }
  }
}

TEST(EffectiveSinr, ConstantFieldIsFixedPoint) {
  for (int m : {2, 4, 6}) {
    for (double v : {0.1, 1.0, 3.7, 20.0}) {
      const std::vector<double> s(12, v);
      EXPECT_NEAR(effective_sinr(s, 1.0, m), v, 1e-6 * v);
    }
  }
}

TEST(EffectiveSinr, MeanInvariance) {
  const std::vector<double> two{2.5, 2.5}, single{2.5};
  EXPECT_EQ(effective_sinr(two, 1.0, 4), effective_sinr(single, 1.0, 4));
  EXPECT_THROW(effective_sinr(std::span<const double>{}, 1.0, 4), std::invalid_argument);
}

TEST(EffectiveSinr, MixedSetAgainstMonteCarloCurve) {
  const std::vector<double> s{1.0, 10.0};
  const double want = mc_f_inverse(0.5 * (mc_f(1.0, 4) + mc_f(10.0, 4)), 4);
  EXPECT_NEAR(linear_to_db(effective_sinr(s, 1.0, 4)), linear_to_db(want), 0.1);
}

TEST(EffectiveSinr, AlphaScaling) {
  const std::vector<double> s{0.5, 4.0, 9.0};
  const double a = 1.7;
  std::vector<double> scaled;
  for (double v : s) scaled.push_back(v / a);
  EXPECT_NEAR(effective_sinr(s, a, 6), a * effective_sinr(scaled, 1.0, 6), 1e-12);
}

TEST(Bler, MidpointTailAndMonotonicity) {
  const LinkConfig cfg;
  for (int cqi = 1; cqi <= 15; ++cqi) {
    const double t = cqi_threshold_db(cqi, cfg);
    EXPECT_NEAR(bler(db_to_linear(t), cqi, cfg), 0.5, 1e-12);
    EXPECT_LT(bler(db_to_linear(t + 20.0), cqi, cfg), 1e-15);
    double prev = 1.0;
    for (double db = -30.0; db <= 40.0; db += 0.05) {
      const double b = bler(db_to_linear(db), cqi, cfg);
      EXPECT_LE(b, prev);
      prev = b;
      if (cqi > 1) EXPECT_GE(b, bler(db_to_linear(db), cqi - 1, cfg));
    }
  }
  EXPECT_THROW(bler(1.0, 0, cfg), std::out_of_range);
  EXPECT_THROW(bler(1.0, 16, cfg), std::out_of_range);
}

TEST(Bler, ThresholdFromEfficiency) {
  const LinkConfig cfg;
  const double eta = cfg.cqi_table.at(9).efficiency;
  EXPECT_NEAR(cqi_threshold_db(9, cfg), 10.0 * std::log10(std::pow(2.0, eta) - 1.0) + 2.0, 1e-12);
}

TEST(Cqi, ClampsAtBothEnds) {
  const LinkConfig cfg;
  EXPECT_EQ(cqi_from_sinr(db_to_linear(cqi_threshold_db(1, cfg) - 30.0), cfg), 1);
  EXPECT_EQ(cqi_from_sinr(db_to_linear(cqi_threshold_db(15, cfg) + 30.0), cfg), 15);
}

TEST(Cqi, MatchesExplicitArgmax) {
  const LinkConfig cfg;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-15.0, 35.0);
  for (int i = 0; i < 2000; ++i) {
    const double s = db_to_linear(u(rng));
    int want = 1;
    for (int c = 1; c <= 15; ++c) {
      if (bler(s, c, cfg) <= 0.1) want = std::max(want, c);
    }
    EXPECT_EQ(cqi_from_sinr(s, cfg), want);
  }
}

TEST(Cqi, SelectUsesPerLevelModulation) {
  const LinkConfig cfg;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5.0, 30.0);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> s;
    for (int j = 0; j < 8; ++j) s.push_back(db_to_linear(u(rng)));
    int want = 1;
    for (int c = 15; c >= 2; --c) {
      const double eff = effective_sinr(s, 1.0, cfg.cqi_table.at(c).modulation_order);
      if (bler(eff, c, cfg) <= 0.1) {
        want = c;
        break;
      }
    }
    EXPECT_EQ(select_cqi(s, cfg), want);
  }
}

TEST(Throughput, SaturatedRankFour) {
  LinkConfig cfg;
  cfg.noise_variance = 1e-9;
  // four orthogonal unit-gain layers
  const CMatrix H = CMatrix::Identity(4, 16) * 2.0;
  TransmissionParams p;
  p.W = CMatrix::Identity(16, 4) * 0.5;
  p.rank = 4;
  p.cqi = 15;
  const std::vector<CMatrix> slice(3, H);
  EXPECT_DOUBLE_EQ(throughput(slice, p, cfg), 864.0 * cfg.cqi_table.at(15).efficiency * 4.0);
}

TEST(Throughput, ZeroWhenBlerSaturates) {
  LinkConfig cfg;
  cfg.noise_variance = 10.0;
  TransmissionParams p;
  p.W = CMatrix::Identity(16, 1);
  p.rank = 1;
  p.cqi = 15;
  const std::vector<CMatrix> slice(2, CMatrix::Identity(4, 16) * 0.01);
  EXPECT_LT(throughput(slice, p, cfg), 1e-6);
}

TEST(Throughput, MatchesOracleComposition) {
  LinkConfig cfg;
  cfg.noise_variance = 0.05;
  std::mt19937_64 rng(9);
  const Codebook cb(BeamConfig{}, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto slice = oracle::random_slice(rng, 6, 4, 16);
    TransmissionParams p;
    const auto& e = cb.at(trial * 15);
    p.W = e.W;
    p.rank = e.rank;
    p.cqi = 1 + trial % 15;
    const auto sinrs = oracle::slice_sinrs(slice, p.W, cfg.noise_variance);
    const int m = cfg.cqi_table.at(p.cqi).modulation_order;
    const double eff = effective_sinr(sinrs, cfg.alpha, m);
    const double db = 10.0 * std::log10(eff);
    const double t = 10.0 * std::log10(std::pow(2.0, cfg.cqi_table.at(p.cqi).efficiency) - 1.0) + 2.0;
    const double b = 1.0 / (1.0 + std::exp(2.0 * (db - t)));
    const double want = 864.0 * cfg.cqi_table.at(p.cqi).efficiency * p.rank * (1.0 - b);
    EXPECT_NEAR(throughput(slice, p, cfg), want, 1e-9 * std::max(1.0, want));
  }
}

TEST(Throughput, RankMismatchThrows) {
  TransmissionParams p;
  p.W = CMatrix::Identity(16, 2) / std::sqrt(2.0);
  p.rank = 1;
  const std::vector<CMatrix> slice(1, CMatrix::Identity(4, 16));
  EXPECT_THROW(throughput(slice, p, LinkConfig{}), std::invalid_argument);
}

TEST(CqiTable, StandardIsMonotone) {
  const auto t = CqiTable::standard();
  for (int c = 2; c <= 15; ++c) EXPECT_GT(t.at(c).efficiency, t.at(c - 1).efficiency);
  EXPECT_THROW(t.at(0), std::out_of_range);
}

TEST(CqiTable, LoadsCsvAndRejectsNonMonotone) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto good = dir / "fdmimo_cqi_good.csv";
  {
    std::ofstream os(good);
    os << "cqi,modulation_order,efficiency\n";
    for (int c = 1; c <= 15; ++c) os << c << ',' << (c <= 6 ? 2 : c <= 9 ? 4 : 6) << ',' << 0.2 * c << '\n';
  }
  const auto t = CqiTable::load_csv(good);
  EXPECT_DOUBLE_EQ(t.at(7).efficiency, 1.4);
  EXPECT_EQ(t.at(10).modulation_order, 6);
  const auto bad = dir / "fdmimo_cqi_bad.csv";
  {
    std::ofstream os(bad);
    os << "cqi,modulation_order,efficiency\n";
    for (int c = 1; c <= 15; ++c) os << c << ",2," << (c == 8 ? 0.1 : 0.2 * c) << '\n';
  }
  EXPECT_THROW(CqiTable::load_csv(bad), std::invalid_argument);
}

TEST(TransmissionParams, ValidateInvariants) {
  TransmissionParams p;
  p.W = CMatrix::Identity(16, 2) / std::sqrt(2.0);
  p.rank = 2;
  p.cqi = 7;
  EXPECT_NO_THROW(p.validate());
  p.cqi = 16;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.cqi = 7;
  p.W *= 2.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_EQ(param_source_from_string(to_string(ParamSource::Inferred)), ParamSource::Inferred);
}
