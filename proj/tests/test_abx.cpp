#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "zrs/abx/abx.hpp"

using namespace zrs;

namespace {

FrameMatrix col(std::initializer_list<float> v) {
  FrameMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (float x : v) m(i++, 0) = x;
  return m;
}

/// Minimum total cost over every monotone alignment path, ties broken by the
/// shorter path, divided by that path's length. Exhaustive recursion.
void enumerate(const Matrix& cost, Eigen::Index i, Eigen::Index j, double acc, int len,
               double& best, int& best_len) {
  acc += cost(i, j);
  ++len;
  if (i == cost.rows() - 1 && j == cost.cols() - 1) {
    if (acc < best || (acc == best && len < best_len)) {
      best = acc;
      best_len = len;
    }
    return;
  }
  if (i + 1 < cost.rows()) enumerate(cost, i + 1, j, acc, len, best, best_len);
  if (j + 1 < cost.cols()) enumerate(cost, i, j + 1, acc, len, best, best_len);
  if (i + 1 < cost.rows() && j + 1 < cost.cols())
    enumerate(cost, i + 1, j + 1, acc, len, best, best_len);
}

double brute_dtw(const FrameMatrix& a, const FrameMatrix& b) {
  Matrix cost(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      cost(i, j) = (a.row(i).cast<double>() - b.row(j).cast<double>()).norm();
  double best = std::numeric_limits<double>::infinity();
  int len = 0;
  enumerate(cost, 0, 0, 0.0, 0, best, len);
  return best / len;
}

PhoneSegment seg(std::string utt, std::string phone, std::string speaker, int frames = 1) {
  return {std::move(utt), 0, frames, std::move(phone), std::move(speaker), "L"};
}

/// One language, every segment its own utterance of 2..4 frames.
struct Toy {
  std::vector<PhoneSegment> segments;
  FeatureArchive features;
};

Toy toy_corpus(int speakers, int phones, int tokens, std::uint64_t seed, int dim = 6,
               bool phone_one_hot = false, bool constant = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  std::uniform_int_distribution<int> len(2, 4);
  Toy t;
  for (int s = 0; s < speakers; ++s)
    for (int p = 0; p < phones; ++p)
      for (int k = 0; k < tokens; ++k) {
        const std::string id = "s" + std::to_string(s) + "p" + std::to_string(p) + "k" + std::to_string(k);
        FrameMatrix f(len(rng), dim);
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = n(rng);
        if (phone_one_hot) {
          f.setZero();
          f.col(p).setOnes();
        }
        if (constant) f.setOnes();
        t.features.add(id, f);
        t.segments.push_back({id, 0, static_cast<int>(f.rows()), "p" + std::to_string(p),
                              "s" + std::to_string(s), "L"});
      }
  return t;
}

}  // namespace

TEST(Dtw, SelfDistanceIsZero) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n;
  FrameMatrix a(7, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = n(rng);
  EXPECT_EQ(dtw_distance(a, a, FrameMetric::kEuclidean), 0.0);
  EXPECT_NEAR(dtw_distance(a, a, FrameMetric::kCosine), 0.0, 1e-12);
}

TEST(Dtw, SingleFramePairEqualsMetric) {
  FrameMatrix a(1, 2), b(1, 2);
  a << 1, 0;
  b << 1, 1;
  EXPECT_NEAR(dtw_distance(a, b, FrameMetric::kCosine), 1 - 1 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(dtw_distance(a, b, FrameMetric::kEuclidean), 1.0, 1e-12);
}

TEST(Dtw, RepeatedFrameAlignsForFree) {
  EXPECT_EQ(dtw_distance(col({0, 1}), col({0, 0, 1}), FrameMetric::kEuclidean), 0.0);
}

TEST(Dtw, MatchesExhaustivePathSearch) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n;
  std::uniform_int_distribution<int> len(1, 5);
  for (int trial = 0; trial < 60; ++trial) {
    FrameMatrix a(len(rng), 2), b(len(rng), 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = n(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = n(rng);
    EXPECT_NEAR(dtw_distance(a, b, FrameMetric::kEuclidean), brute_dtw(a, b), 1e-12);
  }
  // integer costs force ties between paths of different length
  EXPECT_NEAR(dtw_distance(col({0, 2, 0}), col({1, 1}), FrameMetric::kEuclidean),
              brute_dtw(col({0, 2, 0}), col({1, 1})), 1e-12);
}

TEST(Dtw, Errors) {
  EXPECT_THROW(dtw_distance(FrameMatrix(0, 2), FrameMatrix::Zero(1, 2)), Error);
  EXPECT_THROW(dtw_distance(FrameMatrix::Zero(1, 3), FrameMatrix::Zero(1, 2)), Error);
  EXPECT_THROW(frame_metric_from_string("manhattan"), Error);
}

TEST(Cosine, ZeroVectorGuard) {
  const Eigen::RowVectorXf z = Eigen::RowVectorXf::Zero(3);
  const Eigen::RowVectorXf v = Eigen::RowVectorXf::Ones(3);
  EXPECT_EQ(cosine_distance(z, z), 0.0);
  EXPECT_EQ(cosine_distance(z, v), 1.0);
  EXPECT_NEAR(cosine_distance(v, -v), 2.0, 1e-12);
}

TEST(Segments, MaximalRuns) {
  const Manifest m({{"u", "spk", "lang", 6}}, SplitTag::kTrain);
  LabelArchive l(3);
  l.add("u", {0, 0, 1, 1, 1, 0});
  const auto s = segments_from_labels(m, l);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], (PhoneSegment{"u", 0, 2, "0", "spk", "lang"}));
  EXPECT_EQ(s[1], (PhoneSegment{"u", 2, 5, "1", "spk", "lang"}));
  EXPECT_EQ(s[2], (PhoneSegment{"u", 5, 6, "0", "spk", "lang"}));
}

TEST(Triplets, SingleSpeakerHasNoAcross) {
  const auto t = toy_corpus(1, 3, 3, 1);
  const auto across = build_triplets(t.segments, AbxCondition::kAcross, 10, 0);
  EXPECT_TRUE(across.triplets.empty());
  EXPECT_EQ(across.skipped_cells, 0u);  // no speaker pair exists at all
  const auto within = build_triplets(t.segments, AbxCondition::kWithin, 10, 0);
  EXPECT_EQ(within.triplets.size(), 6u * 10);
}

TEST(Triplets, MissingPhoneCellsAreSkipped) {
  std::vector<PhoneSegment> segs{seg("a1", "p", "s"), seg("a2", "p", "s"), seg("b1", "q", "s"),
                                 seg("c1", "p", "t"), seg("c2", "r", "t")};
  const auto across = build_triplets(segs, AbxCondition::kAcross, 5, 0);
  EXPECT_GT(across.skipped_cells, 0u);
  for (const auto& tr : across.triplets) EXPECT_NE(tr.a.speaker_id, tr.x.speaker_id);
}

TEST(Triplets, ConditionInvariants) {
  const auto t = toy_corpus(3, 3, 4, 2);
  for (auto cond : {AbxCondition::kWithin, AbxCondition::kAcross}) {
    const auto set = build_triplets(t.segments, cond, 7, 3);
    ASSERT_FALSE(set.triplets.empty());
    std::map<std::tuple<std::string, std::string, std::string, std::string>, int> per_cell;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& tr : set.triplets) {
      EXPECT_EQ(tr.a.speaker_id, tr.b.speaker_id);
      EXPECT_EQ(tr.a.phone, tr.x.phone);
      EXPECT_NE(tr.a.phone, tr.b.phone);
      EXPECT_TRUE(tr.x_on_a_side);
      if (cond == AbxCondition::kWithin) {
        EXPECT_EQ(tr.x.speaker_id, tr.a.speaker_id);
        EXPECT_NE(tr.x.utterance_id, tr.a.utterance_id);
      } else {
        EXPECT_NE(tr.x.speaker_id, tr.a.speaker_id);
      }
      ++per_cell[{tr.a.phone, tr.b.phone, tr.a.speaker_id, tr.x.speaker_id}];
      EXPECT_TRUE(seen.insert({tr.a.utterance_id, tr.b.utterance_id, tr.x.utterance_id}).second);
    }
    for (const auto& [_, n] : per_cell) EXPECT_LE(n, 7);
  }
}

TEST(Triplets, DeterministicForSeed) {
  const auto t = toy_corpus(3, 3, 4, 2);
  const auto a = build_triplets(t.segments, AbxCondition::kAcross, 5, 3);
  const auto b = build_triplets(t.segments, AbxCondition::kAcross, 5, 3);
  const auto c = build_triplets(t.segments, AbxCondition::kAcross, 5, 4);
  EXPECT_EQ(a.triplets, b.triplets);
  EXPECT_NE(a.triplets, c.triplets);
}

TEST(Score, PerfectFeaturesGiveZero) {
  const auto t = toy_corpus(3, 3, 3, 5, 6, true);
  const auto r = evaluate_abx(t.segments, t.features, 10, 0);
  EXPECT_EQ(r.error("L", AbxCondition::kWithin), 0.0);
  EXPECT_EQ(r.error("L", AbxCondition::kAcross), 0.0);
}

TEST(Score, ConstantFeaturesGiveHalf) {
  const auto t = toy_corpus(3, 3, 3, 5, 6, false, true);
  const auto r = evaluate_abx(t.segments, t.features, 10, 0);
  EXPECT_EQ(r.error("L", AbxCondition::kWithin), 0.5);
  EXPECT_EQ(r.error("L", AbxCondition::kAcross), 0.5);
}

TEST(Score, HandCountedCell) {
  // X near A, X near B, a tie, X near A: (0 + 1 + 0.5 + 0) / 4
  std::map<std::string, float> value{{"a", 0}, {"b5", 5}, {"b2", 2}, {"x1", 0.1f},
                                     {"x2", 4.9f}, {"x3", 1}, {"x4", -1}};
  auto lookup = [&](const PhoneSegment& s) { return col({value.at(s.utterance_id)}); };
  std::vector<AbxTriplet> trs{{seg("a", "p", "s"), seg("b5", "q", "s"), seg("x1", "p", "t")},
                              {seg("a", "p", "s"), seg("b5", "q", "s"), seg("x2", "p", "t")},
                              {seg("a", "p", "s"), seg("b2", "q", "s"), seg("x3", "p", "t")},
                              {seg("a", "p", "s"), seg("b5", "q", "s"), seg("x4", "p", "t")}};
  const auto r = score(trs, lookup, FrameMetric::kEuclidean);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].triplets, 4u);
  EXPECT_DOUBLE_EQ(r.error("L", AbxCondition::kAcross), 0.375);
  EXPECT_THROW(r.error("L", AbxCondition::kWithin), Error);
}

TEST(Score, CellsWeighEquallyRegardlessOfSize) {
  std::map<std::string, float> value{{"a", 0}, {"b", 5}, {"xg", 0.1f}, {"xb", 4.9f}};
  auto lookup = [&](const PhoneSegment& s) { return col({value.at(s.utterance_id)}); };
  std::vector<AbxTriplet> trs;
  // cell (p, q): three correct triplets
  for (int i = 0; i < 3; ++i) trs.push_back({seg("a", "p", "s"), seg("b", "q", "s"), seg("xg", "p", "t")});
  // cell (q, p): one wrong triplet
  trs.push_back({seg("b", "q", "s"), seg("a", "p", "s"), seg("xg", "q", "t")});
  const auto r = score(trs, lookup, FrameMetric::kEuclidean);
  EXPECT_DOUBLE_EQ(r.error("L", AbxCondition::kAcross), 0.5);
}

TEST(Score, SwappingAandBWithXSideKeepsError) {
  const auto t = toy_corpus(2, 3, 3, 6);
  auto set = build_triplets(t.segments, AbxCondition::kAcross, 20, 1).triplets;
  auto swapped = set;
  for (auto& tr : swapped) {
    std::swap(tr.a, tr.b);
    tr.x_on_a_side = false;
  }
  const auto lookup = archive_lookup(t.features);
  const auto r1 = score(set, lookup);
  const auto r2 = score(swapped, lookup);
  EXPECT_DOUBLE_EQ(r1.error("L", AbxCondition::kAcross), r2.error("L", AbxCondition::kAcross));
}

TEST(Score, RandomFeaturesNearChance) {
  const auto t = toy_corpus(4, 4, 10, 7);
  const auto across = build_triplets(t.segments, AbxCondition::kAcross, 100, 2);
  ASSERT_GE(across.triplets.size(), 10000u);
  const auto r = score(across.triplets, archive_lookup(t.features));
  EXPECT_NEAR(r.error("L", AbxCondition::kAcross), 0.5, 0.05);
}

TEST(Score, EuclideanRotationInvariance) {
  auto t = toy_corpus(2, 3, 4, 8, 3);
  const auto set = build_triplets(t.segments, AbxCondition::kAcross, 20, 1).triplets;
  const double before = score(set, archive_lookup(t.features), FrameMetric::kEuclidean)
                            .error("L", AbxCondition::kAcross);
  const double c = std::cos(0.7), s = std::sin(0.7);
  Eigen::Matrix3f rot;
  rot << static_cast<float>(c), static_cast<float>(-s), 0, static_cast<float>(s), static_cast<float>(c), 0, 0, 0, 1;
  FeatureArchive rotated;
  for (const auto& [id, f] : t.features.entries()) rotated.add(id, f * rot.transpose());
  const double after = score(set, archive_lookup(rotated), FrameMetric::kEuclidean)
                           .error("L", AbxCondition::kAcross);
  EXPECT_NEAR(before, after, 1e-9);
}

TEST(Score, CosineScaleInvariance) {
  auto t = toy_corpus(2, 3, 4, 9);
  const auto set = build_triplets(t.segments, AbxCondition::kWithin, 20, 1).triplets;
  FeatureArchive scaled;
  for (const auto& [id, f] : t.features.entries()) scaled.add(id, f * 4.0f);
  EXPECT_EQ(score(set, archive_lookup(t.features)).error("L", AbxCondition::kWithin),
            score(set, archive_lookup(scaled)).error("L", AbxCondition::kWithin));
}

TEST(Score, MissingRepresentationNamesSegment) {
  const auto t = toy_corpus(2, 2, 2, 10);
  FeatureArchive partial;
  partial.add(t.features.entries().front().first, t.features.entries().front().second);
  try {
    evaluate_abx(t.segments, partial, 5, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no representation for segment"), std::string::npos);
  }
}

TEST(Report, JsonAndCsv) {
  const auto t = toy_corpus(2, 2, 3, 11);
  const auto r = evaluate_abx(t.segments, t.features, 3, 0);
  const nlohmann::json j = r;
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].at("language"), "L");
  EXPECT_TRUE(j[0].contains("error_rate"));
  std::ostringstream csv;
  write_cells_csv(r, csv);
  const auto text = csv.str();
  EXPECT_EQ(text.rfind("language,condition,phone_x,phone_y,speaker_ab,speaker_x,triplets,error\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), r.cells.size() + 1);
  EXPECT_NEAR(r.mean_error(AbxCondition::kWithin), r.error("L", AbxCondition::kWithin), 0);
}
