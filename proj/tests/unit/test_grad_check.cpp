#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "slcnn/grad_check.hpp"

namespace slcnn {
namespace {

TEST(GradCheck, LinearMapIsExact) {
  std::vector<double> x{0.3, -1.2, 2.0, 0.7};
  const std::vector<double> a{1.5, -2.0, 0.25, 4.0};
  const auto loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += a[i] * x[i];
    return s;
  };
  const GradCheckBlock blocks[] = {{"x", x, a}};
  const auto r = grad_check(loss, blocks);
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.checked, 4u);
  EXPECT_EQ(r.excluded, 0u);
}

TEST(GradCheck, SignFlippedBackwardIsCaught) {
  std::vector<double> x{0.3, -1.2, 2.0};
  const auto loss = [&] { return x[0] * x[0] + std::sin(x[1]) + std::exp(x[2]); };
  const std::vector<double> wrong{-2 * x[0], -std::cos(x[1]), -std::exp(x[2])};
  const GradCheckBlock blocks[] = {{"x", x, wrong}};
  const auto r = grad_check(loss, blocks);
  EXPECT_NEAR(r.max_relative_error, 2.0, 1e-6);
  EXPECT_EQ(r.worst_block, "x");
}

TEST(GradCheck, ValuesAreRestored) {
  std::vector<double> x{1, 2, 3};
  const std::vector<double> g{2, 4, 6};
  const auto loss = [&] { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; };
  const GradCheckBlock blocks[] = {{"x", x, g}};
  const auto r = grad_check(loss, blocks);
  EXPECT_EQ(x, (std::vector<double>{1, 2, 3}));
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(GradCheck, KinkIsExcluded) {
  // |x| probed at 0 has one-sided slopes -1 and +1.
  std::vector<double> x{0.0, 0.5};
  const std::vector<double> g{0.0, 1.0};
  const auto loss = [&] { return std::abs(x[0]) + std::abs(x[1]); };
  const GradCheckBlock blocks[] = {{"x", x, g}};
  const auto r = grad_check(loss, blocks);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.checked, 1u);
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(GradCheck, RegionKeyReplacesSlopeTest) {
  // max(0, x) with x[0] just inside the probe interval of the kink and x[1]
  // strongly curved but smooth. The region key sees only the kink.
  std::vector<double> x{3e-5, 2.0};
  const std::vector<double> g{1.0, 4 * std::pow(2.0, 3)};
  const auto loss = [&] { return std::max(0.0, x[0]) + std::pow(x[1], 4); };
  GradCheckOptions o;
  o.region = [&] { return static_cast<std::uint64_t>(x[0] > 0); };
  const GradCheckBlock blocks[] = {{"x", x, g}};
  const auto r = grad_check(loss, blocks, o);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.checked, 1u);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST(GradCheck, WholeModelAgrees) {
  ModelConfig c;
  c.doc_threshold = 3;
  c.num_filters = 2;
  c.fc_units = 4;
  c.num_classes = 2;
  c.embed_dim = 6;
  const auto model = Model::build(c).cast<double>();
  BasicFeatureMap<double> doc(3, c.sentence_threshold, 6);
  for (std::size_t i = 0; i < doc.data().size(); ++i) doc.data()[i] = std::sin(0.37 * static_cast<double>(i));
  const auto r = grad_check_model(model, doc, 1, Mode::kTrain, 5);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.to_json().dump();
  EXPECT_EQ(r.checked + r.excluded, count_parameters(c));
}

TEST(GradCheck, WorstCoordinateIsReported) {
  std::vector<double> a{1, 1}, b{1, 1};
  const std::vector<double> ga{1, 1}, gb{1, 1.5};
  const auto loss = [&] { return a[0] + a[1] + b[0] + b[1]; };
  const GradCheckBlock blocks[] = {{"a", a, ga}, {"b", b, gb}};
  const auto r = grad_check(loss, blocks);
  EXPECT_EQ(r.worst_block, "b");
  EXPECT_EQ(r.worst_index, 1u);
  EXPECT_NEAR(r.max_relative_error, 0.5 / 1.5, 1e-8);
  EXPECT_EQ(r.to_json()["schema"], "slcnn.grad_check/1");
}

TEST(GradCheck, StridedSubset) {
  std::vector<double> x(100, 1.0);
  const std::vector<double> g(100, 1.0);
  const auto loss = [&] {
    double s = 0;
    for (double v : x) s += v;
    return s;
  };
  GradCheckOptions o;
  o.max_per_block = 10;
  const GradCheckBlock blocks[] = {{"x", x, g}};
  EXPECT_EQ(grad_check(loss, blocks, o).checked, 10u);
}

}  // namespace
}  // namespace slcnn
