#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmhs/audio_features.hpp"
#include "mmhs/errors.hpp"
#include "test_support.hpp"

using namespace mmhs;
using namespace mmhs::features;
using namespace mmhs::testing;

namespace {

signal::AudioSignal tone(double freq, double seconds, int rate = 44100) {
  return {sine(freq, 1.0, rate, static_cast<std::size_t>(std::lround(seconds * rate))), rate, "tone"};
}

MidTermFeatureMatrix random_mid(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  MidTermFeatureMatrix mt;
  mt.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kMidTermCount));
  for (Eigen::Index i = 0; i < mt.values.size(); ++i) mt.values.data()[i] = d(rng);
  return mt;
}

}  // namespace

TEST(ShortTerm, FrameCountForFourAndAHalfSeconds) {
  const auto st = short_term_features(tone(300.0, 4.5));
  EXPECT_EQ(st.values.rows(), 90);
  EXPECT_EQ(st.values.cols(), 68);
  EXPECT_EQ(short_term_feature_names().size(), 68u);
  EXPECT_TRUE(st.values.allFinite());
}

TEST(ShortTerm, ZeroSignalHasZeroEnergyAndCrossings) {
  signal::AudioSignal s{std::vector<double>(44100, 0.0), 44100, "z"};
  const auto st = short_term_features(s);
  for (Eigen::Index t = 0; t < st.values.rows(); ++t) {
    EXPECT_EQ(st.values(t, kEnergy), 0.0);
    EXPECT_EQ(st.values(t, kZeroCrossingRate), 0.0);
  }
  EXPECT_TRUE(st.values.allFinite());
}

TEST(ShortTerm, CentroidOfA440MatchesFftOracle) {
  const int rate = 44100;
  const auto s = tone(440.0, 0.2, rate);
  const auto st = short_term_features(s);
  const std::size_t n = 2205;

  // Independent single-frame computation: Hamming window, |X_k| weights at k*fs/N.
  std::vector<double> frame(n);
  for (std::size_t i = 0; i < n; ++i)
    frame[i] = s.samples[i] * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1.0)));
  const auto spec = naive_dft(frame);
  double weighted = 0.0, mass = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double m = std::abs(spec[k]);
    weighted += m * static_cast<double>(k) * rate / static_cast<double>(n);
    mass += m;
  }
  const double oracle_hz = weighted / mass;
  const double measured_hz = st.values(0, kSpectralCentroid) * rate / 2.0;
  EXPECT_NEAR(measured_hz, oracle_hz, 1e-6 * oracle_hz);
  EXPECT_NEAR(measured_hz, 440.0, 0.02 * 440.0);
}

TEST(ShortTerm, DeltasOfConstantSignalVanish) {
  signal::AudioSignal s{std::vector<double>(44100, 0.25), 44100, "c"};
  const auto st = short_term_features(s);
  for (Eigen::Index t = 0; t < st.values.rows(); ++t)
    for (std::size_t i = kBaseFeatureCount; i < kShortTermCount; ++i)
      EXPECT_NEAR(st.values(t, static_cast<Eigen::Index>(i)), 0.0, 1e-12);
}

TEST(ShortTerm, EnergyNonNegativeAndEntropyBounded) {
  signal::AudioSignal s{white_noise(0.3, 44100, 4), 44100, "n"};
  const auto st = short_term_features(s);
  for (Eigen::Index t = 0; t < st.values.rows(); ++t) {
    EXPECT_GE(st.values(t, kEnergy), 0.0);
    EXPECT_LE(st.values(t, kEnergyEntropy), std::log2(static_cast<double>(kEntropyBlocks)) + 1e-9);
    EXPECT_GE(st.values(t, kEnergyEntropy), 0.0);
  }
}

TEST(ShortTerm, MfccsOfPureToneAreStable) {
  const auto st = short_term_features(tone(500.0, 2.0));
  const Eigen::Index frames = st.values.rows();
  for (std::size_t c = 0; c < kMfccCount; ++c) {
    const auto col = st.values.col(static_cast<Eigen::Index>(kMfccFirst + c)).segment(1, frames - 2);
    const double mean = col.mean();
    const double std = std::sqrt((col.array() - mean).square().mean());
    EXPECT_LT(std / std::abs(mean), 0.05) << "mfcc " << c;
  }
}

TEST(ShortTerm, TooShortSignalThrows) {
  signal::AudioSignal s{std::vector<double>(100, 0.1), 44100, "s"};
  EXPECT_THROW(short_term_features(s), TooShortError);
}

TEST(MidTerm, FourAndAHalfSecondsGivesFiveWindows) {
  const auto st = short_term_features(tone(300.0, 4.5));
  const auto mt = mid_term_features(st);
  EXPECT_EQ(mt.values.rows(), 5);
  EXPECT_EQ(mt.values.cols(), 136);
  EXPECT_EQ(mid_term_feature_names().size(), 136u);
  // Last window covers frames 80..89.
  for (std::size_t c = 0; c < kShortTermCount; ++c)
    EXPECT_NEAR(mt.values(4, static_cast<Eigen::Index>(c)),
                st.values.col(static_cast<Eigen::Index>(c)).segment(80, 10).mean(), 1e-12);
}

TEST(MidTerm, ConstantRowsGiveZeroStd) {
  ShortTermFeatureMatrix st;
  st.values = Eigen::MatrixXd::Constant(40, 68, 2.5);
  const auto mt = mid_term_features(st);
  for (Eigen::Index r = 0; r < mt.values.rows(); ++r)
    for (Eigen::Index c = 0; c < 68; ++c) {
      EXPECT_EQ(mt.values(r, c), 2.5);
      EXPECT_EQ(mt.values(r, c + 68), 0.0);
    }
}

TEST(MidTerm, RandomMatrixMatchesRecomputation) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> d(0.0, 2.0);
  ShortTermFeatureMatrix st;
  st.values.resize(40, 68);
  for (Eigen::Index i = 0; i < st.values.size(); ++i) st.values.data()[i] = d(rng);
  const auto mt = mid_term_features(st, 2000.0, 2000.0);
  ASSERT_EQ(mt.values.rows(), 1);
  for (Eigen::Index c = 0; c < 68; ++c) {
    double sum = 0.0;
    for (Eigen::Index t = 0; t < 40; ++t) sum += st.values(t, c);
    const double mean = sum / 40.0;
    double sq = 0.0;
    for (Eigen::Index t = 0; t < 40; ++t) sq += (st.values(t, c) - mean) * (st.values(t, c) - mean);
    EXPECT_NEAR(mt.values(0, c), mean, 1e-9);
    EXPECT_NEAR(mt.values(0, c + 68), std::sqrt(sq / 40.0), 1e-9);
  }
}

TEST(F1, SingleWindowIsVerbatimAndTwoWindowsAverage) {
  auto one = random_mid(1, 1);
  const auto f1 = make_f1(one);
  ASSERT_EQ(f1.values.size(), kF1Length);
  for (std::size_t c = 0; c < kF1Length; ++c) EXPECT_EQ(f1.values[c], one.values(0, static_cast<Eigen::Index>(c)));

  auto two = random_mid(2, 2);
  const auto avg = make_f1(two);
  for (std::size_t c = 0; c < kF1Length; ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    EXPECT_NEAR(avg.values[c], (two.values(0, i) + two.values(1, i)) / 2.0, 1e-15);
  }
}

TEST(F1, RealClipMatchesColumnMean) {
  const auto mt = mid_term_features(short_term_features(tone(250.0, 4.5)));
  const auto f1 = make_f1(mt);
  for (std::size_t c = 0; c < kF1Length; ++c) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < mt.values.rows(); ++r) s += mt.values(r, static_cast<Eigen::Index>(c));
    EXPECT_NEAR(f1.values[c], s / static_cast<double>(mt.values.rows()), 1e-9);
  }
}

TEST(F2, PadsShortClipWithZeros) {
  const auto mt = random_mid(5, 3);
  const auto f2 = make_f2(mt);
  ASSERT_EQ(f2.values.size(), 1360u);
  for (std::size_t i = 0; i < 680; ++i)
    EXPECT_EQ(f2.values[i], mt.values(static_cast<Eigen::Index>(i / 136), static_cast<Eigen::Index>(i % 136)));
  for (std::size_t i = 680; i < 1360; ++i) EXPECT_EQ(f2.values[i], 0.0);
}

TEST(F2, ExactTenRowsConcatenate) {
  const auto mt = random_mid(10, 4);
  const auto f2 = make_f2(mt);
  for (std::size_t i = 0; i < 1360; ++i)
    EXPECT_EQ(f2.values[i], mt.values(static_cast<Eigen::Index>(i / 136), static_cast<Eigen::Index>(i % 136)));
}

TEST(F2, TruncatesBeyondTenRows) {
  auto mt = random_mid(34, 5);
  const auto f2 = make_f2(mt);
  for (std::size_t i = 0; i < 1360; ++i)
    EXPECT_EQ(f2.values[i], mt.values(static_cast<Eigen::Index>(i / 136), static_cast<Eigen::Index>(i % 136)));
  mt.values.row(10).setConstant(1e6);
  EXPECT_EQ(make_f2(mt).values, f2.values);
}

TEST(F2, SignalContentBeyondTenSecondsIsIgnored) {
  const int rate = 8000;
  auto a = white_noise(0.2, 12 * rate, 8);
  auto b = a;
  for (std::size_t i = 10 * rate; i < b.size(); ++i) b[i] = 0.9 * std::sin(0.01 * i);
  const auto fa = extract_representation({a, rate, "a"}, RepresentationKind::F2);
  const auto fb = extract_representation({b, rate, "b"}, RepresentationKind::F2);
  EXPECT_EQ(fa.values, fb.values);
}

TEST(DimensionChain, TenSecondClip) {
  const auto s = tone(200.0, 10.0);
  const auto st = short_term_features(s);
  const auto mt = mid_term_features(st);
  EXPECT_EQ(st.values.rows(), 200);
  EXPECT_EQ(st.values.cols(), 68);
  EXPECT_EQ(mt.values.rows(), 10);
  EXPECT_EQ(mt.values.cols(), 136);
  EXPECT_EQ(make_f2(mt).values.size(), 1360u);
  EXPECT_EQ(make_f1(mt).values.size(), 136u);
}

TEST(Scaler, FitExamples) {
  const auto single = fit_scaler(std::vector<FeatureRepresentation>{{RepresentationKind::F1, {1.0, 2.0}}});
  EXPECT_EQ(single.min(), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(single.max(), (std::vector<double>{1.0, 2.0}));

  const auto two = fit_scaler(std::vector<FeatureRepresentation>{{RepresentationKind::F1, {0.0, 10.0}},
                                                                 {RepresentationKind::F1, {4.0, -10.0}}});
  EXPECT_EQ(two.min(), (std::vector<double>{0.0, -10.0}));
  EXPECT_EQ(two.max(), (std::vector<double>{4.0, 10.0}));
  EXPECT_THROW(fit_scaler(std::vector<FeatureRepresentation>{}), ValidationError);
}

TEST(Scaler, RandomCollectionMatchesScanAndCoversRange) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-50.0, 50.0);
  std::vector<FeatureRepresentation> reps(100);
  for (auto& r : reps) {
    r.values.resize(20);
    for (double& v : r.values) v = d(rng);
  }
  const auto scaler = fit_scaler(reps);
  for (std::size_t i = 0; i < 20; ++i) {
    double lo = reps[0].values[i], hi = lo;
    for (const auto& r : reps) {
      lo = std::min(lo, r.values[i]);
      hi = std::max(hi, r.values[i]);
    }
    EXPECT_EQ(scaler.min()[i], lo);
    EXPECT_EQ(scaler.max()[i], hi);
  }
  for (std::size_t i = 0; i < 20; ++i) {
    bool saw_low = false, saw_high = false;
    for (const auto& r : reps) {
      const double v = apply_scaler(scaler, r).values[i];
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
      saw_low |= v == -1.0;
      saw_high |= v == 1.0;
    }
    EXPECT_TRUE(saw_low && saw_high);
  }
}

TEST(Scaler, EndpointsMidpointClampAndDegenerate) {
  FeatureScaler s({0.0, -2.0, 5.0}, {4.0, 2.0, 5.0});
  EXPECT_EQ(s.transform(std::vector<double>{0.0, -2.0, 5.0}), (std::vector<double>{-1.0, -1.0, 0.0}));
  EXPECT_EQ(s.transform(std::vector<double>{4.0, 2.0, 7.0}), (std::vector<double>{1.0, 1.0, 0.0}));
  EXPECT_EQ(s.transform(std::vector<double>{2.0, 0.0, 5.0}), (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(s.transform(std::vector<double>{100.0, -9.0, 5.0}), (std::vector<double>{1.0, -1.0, 0.0}));
  EXPECT_THROW(s.transform(std::vector<double>{1.0}), DimensionError);
}
