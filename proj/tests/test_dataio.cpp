#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "imbppo/dataio.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace imbppo;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "imbppo_dataio_test";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << content;
  return path;
}

DatasetTable table_from(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                        std::size_t n_classes = 2) {
  DatasetTable t;
  t.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  t.labels = labels;
  for (std::size_t c = 0; c < rows.front().size(); ++c) t.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t c = 0; c < n_classes; ++c) t.class_names.push_back("k" + std::to_string(c));
  return t;
}

}  // namespace

TEST(LoadTable, ThreeRowFileEncodesLabelsBySortedName) {
  const auto path = write_temp("three.csv", "x,y,label\n1,2,a\n3,4,b\n5,6,a\n");
  const auto t = load_table(path, "label");
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.n_features(), 2u);
  EXPECT_EQ(t.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(t.class_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.feature_names, (std::vector<std::string>{"x", "y"}));
  EXPECT_DOUBLE_EQ(t.features(2, 1), 6.0);
}

TEST(LoadTable, SortsClassNamesLexicographically) {
  const auto path = write_temp("sorted.csv", "f,label\n1,zeta\n2,alpha\n3,mid\n");
  const auto t = load_table(path, "label");
  EXPECT_EQ(t.class_names, (std::vector<std::string>{"alpha", "mid", "zeta"}));
  EXPECT_EQ(t.labels, (std::vector<int>{2, 0, 1}));
}

TEST(LoadTable, HeaderOnlyIsEmptyDataset) {
  const auto path = write_temp("header_only.csv", "x,label\n");
  try {
    load_table(path, "label");
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
  }
}

TEST(LoadTable, MissingFileAndMissingLabelColumn) {
  EXPECT_THROW(load_table("/nonexistent/nowhere.csv", "label"), InputError);
  const auto path = write_temp("nolabel.csv", "x,y\n1,2\n");
  EXPECT_THROW(load_table(path, "label"), InputError);
}

TEST(LoadTable, TrimsHeaderSpacesAndParsesInfinity) {
  // CICIDS2017 headers carry leading spaces and cells spell "Infinity"/"NaN".
  const auto path = write_temp("cic.csv", " Flow Bytes/s, Flow Packets/s, Label\n1,Infinity,BENIGN\nNaN,2,DoS Hulk\n3,4,BENIGN\n");
  const auto t = load_table(path, "Label");
  EXPECT_EQ(t.feature_names.front(), "Flow Bytes/s");
  EXPECT_TRUE(std::isinf(t.features(0, 1)));
  EXPECT_TRUE(std::isnan(t.features(1, 0)));
  const auto cleaned = clean_rows(t);
  EXPECT_EQ(cleaned.table.rows(), 1u);
  EXPECT_EQ(cleaned.report.inf_nan, 2u);
}

TEST(LoadTable, NonNumericCellsAreFlaggedNotFatal) {
  const auto path = write_temp("nonnum.csv", "x,label\n1,a\nabc,b\n3,b\n");
  const auto t = load_table(path, "label");
  ASSERT_EQ(t.row_flags.size(), 3u);
  EXPECT_TRUE(t.row_flags[1] & kRowNonNumeric);
  const auto cleaned = clean_rows(t);
  EXPECT_EQ(cleaned.report.non_numeric, 1u);
  EXPECT_EQ(cleaned.table.rows(), 2u);
}

TEST(LoadTable, OutlierMarkerInLabelColumnIsNotAClass) {
  const auto path = write_temp("dropit.csv", "x,label\n1,normal\n2,drop-it\n3,fault\n4,normal\n");
  const auto t = load_table(path, LoadOptions{"label", "label", "drop-it"});
  EXPECT_EQ(t.class_names, (std::vector<std::string>{"fault", "normal"}));
  const auto cleaned = clean_rows(t);
  EXPECT_EQ(cleaned.report.outlier, 1u);
  EXPECT_EQ(cleaned.table.rows(), 3u);
}

TEST(LoadTable, SeparateFlagColumnIsExcludedFromFeatures) {
  const auto path = write_temp("flagcol.csv", "x,status,label\n1,ok,a\n2,drop-it,b\n3,ok,b\n");
  const auto t = load_table(path, LoadOptions{"label", "status", "drop-it"});
  EXPECT_EQ(t.n_features(), 1u);
  EXPECT_EQ(clean_rows(t).table.rows(), 2u);
}

TEST(CleanRows, FiveRowsOneInf) {
  const double inf = std::numeric_limits<double>::infinity();
  auto t = table_from({{1}, {2}, {inf}, {4}, {5}}, {0, 1, 0, 1, 0});
  const auto r = clean_rows(t);
  EXPECT_EQ(r.table.rows(), 4u);
  EXPECT_EQ(r.report.inf_nan, 1u);
  EXPECT_EQ(r.report.total(), 1u);
}

TEST(CleanRows, CleanTableIsUnchanged) {
  auto t = table_from({{1, 2}, {3, 4}}, {0, 1});
  const auto r = clean_rows(t);
  EXPECT_EQ(r.report, CleanReport{});
  EXPECT_EQ(r.table.features, t.features);
  EXPECT_EQ(r.table.labels, t.labels);
}

TEST(CleanRows, TenRowsTwoOutliersOneNaN) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({static_cast<double>(i)});
  rows[4][0] = std::numeric_limits<double>::quiet_NaN();
  auto t = table_from(rows, {0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  t.row_flags.assign(10, kRowOk);
  t.row_flags[1] = kRowOutlier;
  t.row_flags[7] = kRowOutlier;
  const auto r = clean_rows(t);
  EXPECT_EQ(r.table.rows(), 7u);
  EXPECT_EQ(r.report.outlier, 2u);
  EXPECT_EQ(r.report.inf_nan, 1u);
}

TEST(CleanRows, AllRowsRemovedIsAnError) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto t = table_from({{nan}, {nan}}, {0, 1});
  EXPECT_THROW(clean_rows(t), InputError);
}

TEST(CleanRows, Idempotent) {
  const double inf = std::numeric_limits<double>::infinity();
  imbppo::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
      const double u = uniform_unit(rng);
      rows.push_back({u < 0.1 ? inf : u, u < 0.2 && u >= 0.1 ? std::nan("") : 1.0 - u});
      labels.push_back(i % 2);
    }
    const auto once = clean_rows(table_from(rows, labels)).table;
    const auto twice = clean_rows(once);
    EXPECT_EQ(twice.report.total(), 0u);
    EXPECT_EQ(twice.table.features, once.features);
    EXPECT_EQ(twice.table.labels, once.labels);
  }
}

TEST(MinMax, FitColumnExtrema) {
  auto one = table_from({{0}, {10}, {5}}, {0, 1, 0});
  auto stats = fit_minmax(one);
  EXPECT_EQ(stats.min(0), 0.0);
  EXPECT_EQ(stats.max(0), 10.0);

  auto constant = table_from({{3}, {3}, {3}}, {0, 1, 0});
  stats = fit_minmax(constant);
  EXPECT_EQ(stats.min(0), 3.0);
  EXPECT_EQ(stats.max(0), 3.0);

  auto two = table_from({{1, 4}, {2, 8}, {0, 6}}, {0, 1, 0});
  stats = fit_minmax(two);
  EXPECT_EQ(stats.min, Eigen::Vector2d(0, 4));
  EXPECT_EQ(stats.max, Eigen::Vector2d(2, 8));
}

TEST(MinMax, ApplyValues) {
  NormalizationStats stats{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 10.0)};
  const auto t = apply_minmax(stats, table_from({{5}, {0}, {10}, {20}, {-10}}, {0, 1, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(t.features(0, 0), 0.5);
  EXPECT_EQ(t.features(1, 0), 0.0);
  EXPECT_EQ(t.features(2, 0), 1.0);
  // Unseen values are not clipped.
  EXPECT_DOUBLE_EQ(t.features(3, 0), 2.0);
  EXPECT_DOUBLE_EQ(t.features(4, 0), -1.0);
}

TEST(MinMax, ConstantColumnMapsToZero) {
  NormalizationStats stats{Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Constant(1, 3.0)};
  const auto t = apply_minmax(stats, table_from({{3}, {7}, {-2}}, {0, 1, 0}));
  EXPECT_EQ(t.features.col(0), Eigen::VectorXd::Zero(3));
}

TEST(MinMax, DimensionMismatch) {
  NormalizationStats stats{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)};
  EXPECT_THROW(apply_minmax(stats, table_from({{1, 2}}, {0})), InputError);
}

TEST(MinMax, SelfFitLandsInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = oracle::blobs({40, 25, 10}, {-3.0, 0.5, 7.0}, 2.5, 4, seed);
    const auto n = apply_minmax(fit_minmax(t), t);
    EXPECT_GE(n.features.minCoeff(), -1e-12);
    EXPECT_LE(n.features.maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(StratifiedSplit, SingleClassExactProportion) {
  DatasetTable t = oracle::blobs({100, 2}, {0.0, 5.0}, 1.0, 1, 3);
  const auto s = stratified_split(t, {0.2, true, 1});
  EXPECT_EQ(s.test.class_counts()[0], 20u);
  EXPECT_EQ(s.train.class_counts()[0], 80u);
}

TEST(StratifiedSplit, ImbalancedPerClassRounding) {
  const auto t = oracle::blobs({95, 5}, {0.0, 1.0}, 1.0, 2, 4);
  const auto s = stratified_split(t, {0.2, true, 9});
  EXPECT_EQ(s.test.class_counts(), (std::vector<std::size_t>{19, 1}));
  EXPECT_EQ(s.train.class_counts(), (std::vector<std::size_t>{76, 4}));
}

TEST(StratifiedSplit, DeterministicPerSeed) {
  const auto t = oracle::blobs({60, 40}, {0.0, 1.0}, 1.0, 3, 4);
  const auto a = stratified_split(t, {0.3, true, 42});
  const auto b = stratified_split(t, {0.3, true, 42});
  EXPECT_EQ(a.test.features, b.test.features);
  EXPECT_EQ(a.train.labels, b.train.labels);
  const auto c = stratified_split(t, {0.3, true, 43});
  EXPECT_NE(a.test.features, c.test.features);
}

TEST(StratifiedSplit, TooSmallClassIsRejected) {
  const auto t = oracle::blobs({10, 1}, {0.0, 1.0}, 1.0, 1, 4);
  EXPECT_THROW(stratified_split(t, {0.2, true, 0}), InputError);
  EXPECT_THROW(stratified_split(t, {1.0, true, 0}), InputError);
}

TEST(StratifiedSplit, PartitionAndProportionProperty) {
  imbppo::Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n_classes = 2 + uniform_index(rng, 4);
    std::vector<std::size_t> counts;
    std::vector<double> means;
    for (std::size_t c = 0; c < n_classes; ++c) {
      counts.push_back(2 + uniform_index(rng, 200));
      means.push_back(static_cast<double>(c));
    }
    const double frac = 0.05 + 0.9 * uniform_unit(rng);
    const auto t = oracle::blobs(counts, means, 1.0, 2, static_cast<std::uint64_t>(trial));
    const auto s = stratified_split(t, {frac, true, static_cast<std::uint64_t>(trial)});
    ASSERT_EQ(s.train.rows() + s.test.rows(), t.rows());
    const auto test_counts = s.test.class_counts();
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double expected = std::round(static_cast<double>(counts[c]) * frac);
      EXPECT_LE(std::abs(static_cast<double>(test_counts[c]) - expected), 1.0);
    }
    // Every original row appears exactly once across the two sides.
    std::multiset<std::pair<double, double>> original, rejoined;
    for (std::size_t i = 0; i < t.rows(); ++i)
      original.insert({t.features(static_cast<Eigen::Index>(i), 0), t.features(static_cast<Eigen::Index>(i), 1)});
    for (const auto* side : {&s.train, &s.test})
      for (std::size_t i = 0; i < side->rows(); ++i)
        rejoined.insert({side->features(static_cast<Eigen::Index>(i), 0), side->features(static_cast<Eigen::Index>(i), 1)});
    EXPECT_EQ(original, rejoined);
  }
}

TEST(GenerateSynthetic, CountContractAndOrder) {
  const auto t = oracle::blobs({3, 2}, {0.0, 1.0}, 1.0, 2, 0);
  EXPECT_EQ(t.labels, (std::vector<int>{0, 0, 0, 1, 1}));
  EXPECT_EQ(t.class_names, (std::vector<std::string>{"c0", "c1"}));
}

TEST(GenerateSynthetic, SampleMeanNearSpecMean) {
  SyntheticSpec spec;
  spec.counts = {10000, 1};
  spec.n_features = 2;
  spec.seed = 99;
  spec.means = {Eigen::Vector2d(1.5, -2.0), Eigen::Vector2d(0, 0)};
  spec.stddevs = {Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(1, 1)};
  const auto t = generate_synthetic(spec);
  const Eigen::RowVector2d mean = t.features.topRows(10000).colwise().mean();
  EXPECT_NEAR(mean(0), 1.5, 0.05);
  EXPECT_NEAR(mean(1), -2.0, 0.05);
}

TEST(GenerateSynthetic, SameSeedIdenticalTables) {
  const auto a = oracle::blobs({50, 20}, {0.0, 1.0}, 0.7, 3, 123);
  const auto b = oracle::blobs({50, 20}, {0.0, 1.0}, 0.7, 3, 123);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(GenerateSynthetic, RejectsBadSpec) {
  SyntheticSpec spec;
  spec.counts = {3, 0};
  spec.n_features = 1;
  spec.means = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  spec.stddevs = {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  EXPECT_THROW(generate_synthetic(spec), InputError);
  spec.counts = {3, 3};
  spec.stddevs[1](0) = 0.0;
  EXPECT_THROW(generate_synthetic(spec), InputError);
}

TEST(WriteTable, RoundTripsThroughLoad) {
  const auto t = oracle::blobs({7, 4, 3}, {-1.0, 0.0, 2.0}, 0.3, 3, 8);
  const auto path = fs::temp_directory_path() / "imbppo_dataio_test" / "roundtrip.csv";
  fs::create_directories(path.parent_path());
  write_table(path, t);
  const auto back = load_table(path, "label");
  EXPECT_EQ(back.features, t.features);
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_EQ(back.class_names, t.class_names);
}
