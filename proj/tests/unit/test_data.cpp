#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"
#include "fedgan/data/pipeline.hpp"
#include "fedgan/data/records.hpp"

using namespace fedgan;
using namespace fedgan::data;

namespace {

std::string header() {
  std::string h = "timestamp";
  for (auto n : feature_names()) h += "," + std::string(n);
  return h + ",label\n";
}

std::string row(const std::string& ts, double base, const std::string& label = "0") {
  std::string r = ts;
  for (std::size_t j = 0; j < kFeatureCount; ++j) r += "," + std::to_string(base + j);
  return r + "," + label + "\n";
}

std::vector<MetricsRecord> ramp_records(std::size_t n) {
  std::vector<MetricsRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      out[i].features[j] = static_cast<double>(i) + 0.1 * static_cast<double>(j);
    }
    out[i].abnormal = false;
  }
  return out;
}

std::vector<WindowedSample> plain_windows(std::size_t n, std::size_t t = 4) {
  Rng rng(3);
  std::vector<WindowedSample> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i].x = Tensor({t, kFeatureCount});
    for (double& v : w[i].x.data()) v = rng.uniform();
    w[i].start = i;
  }
  return w;
}

}  // namespace

TEST(Schema, GroupsMatchTable) {
  EXPECT_EQ(feature_names().size(), 26u);
  EXPECT_EQ(group_range(FeatureGroup::cpu), (std::pair<std::size_t, std::size_t>{0, 4}));
  EXPECT_EQ(group_range(FeatureGroup::disk), (std::pair<std::size_t, std::size_t>{4, 12}));
  EXPECT_EQ(group_range(FeatureGroup::memory), (std::pair<std::size_t, std::size_t>{12, 19}));
  EXPECT_EQ(group_range(FeatureGroup::network), (std::pair<std::size_t, std::size_t>{19, 26}));
  std::set<std::string_view> unique(feature_names().begin(), feature_names().end());
  EXPECT_EQ(unique.size(), 26u);
}

TEST(Load, HeaderOnlyIsEmpty) {
  std::istringstream in(header());
  EXPECT_TRUE(read_dataset(in, ColumnMapping{}).empty());
}

TEST(Load, ThreeRowsInOrder) {
  std::istringstream in(header() + row("t0", 1) + row("t1", 2, "1") + row("t2", 3));
  auto recs = read_dataset(in, ColumnMapping{});
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].timestamp, "t0");
  EXPECT_EQ(recs[2].features[25], 28.0);
  EXPECT_TRUE(*recs[1].abnormal);
  EXPECT_FALSE(*recs[0].abnormal);
}

TEST(Load, ColumnMappingResolvesArbitraryNames) {
  ColumnMapping m;
  m.features[0] = "CPU Idle %";
  m.delimiter = ';';
  std::string h = "when;\"CPU Idle %\"";
  for (std::size_t j = 1; j < kFeatureCount; ++j) h += ";" + std::string(feature_names()[j]);
  m.timestamp = "when";
  std::string r = "x;5";
  for (std::size_t j = 1; j < kFeatureCount; ++j) r += ";1";
  std::istringstream in(h + "\n" + r + "\n");
  auto recs = read_dataset(in, m);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].features[0], 5.0);
  EXPECT_FALSE(recs[0].abnormal.has_value());
}

TEST(Load, MissingMappedColumn) {
  ColumnMapping m;
  m.features[3] = "nope";
  std::istringstream in(header());
  EXPECT_THROW(read_dataset(in, m), FormatError);
}

TEST(Load, UnparseableRowReportsLineNumber) {
  std::string bad = row("t1", 2);
  bad.replace(bad.find(",2.0"), 4, ",abc");
  const std::string text = header() + row("t0", 1) + bad + row("t2", 3);
  {
    std::istringstream in(text);
    try {
      read_dataset(in, ColumnMapping{}, RowErrorPolicy::fail);
      FAIL();
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
  }
  std::istringstream in(text);
  LoadReport rep;
  auto recs = read_dataset(in, ColumnMapping{}, RowErrorPolicy::skip, &rep);
  EXPECT_EQ(recs.size(), 2u);
  EXPECT_EQ(rep.rows_skipped, 1u);
  ASSERT_EQ(rep.diagnostics.size(), 1u);
  EXPECT_EQ(rep.diagnostics[0].rfind("line 3", 0), 0u);
}

TEST(Load, ShortGapsInterpolatedLongGapsDropped) {
  auto blank = [](std::string r, std::size_t feature) {
    // Blank out one feature column (column index feature + 1).
    std::vector<std::string> cells;
    std::stringstream ss(r.substr(0, r.size() - 1));
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    cells[feature + 1] = "";
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    return out + "\n";
  };
  std::string text = header() + row("0", 0);
  for (int i = 1; i <= 3; ++i) text += blank(row(std::to_string(i), i), 5);
  text += row("4", 4);
  for (int i = 5; i <= 8; ++i) text += blank(row(std::to_string(i), i), 7);
  text += row("9", 9);
  std::istringstream in(text);
  LoadReport rep;
  auto recs = read_dataset(in, ColumnMapping{}, RowErrorPolicy::fail, &rep);
  EXPECT_EQ(rep.cells_interpolated, 3u);
  EXPECT_EQ(rep.rows_dropped_missing, 4u);
  ASSERT_EQ(recs.size(), 6u);
  EXPECT_DOUBLE_EQ(recs[1].features[5], 6.0);  // between 5 and 9
  EXPECT_DOUBLE_EQ(recs[3].features[5], 8.0);
  EXPECT_EQ(recs[5].timestamp, "9");
}

TEST(Load, WriteReadRoundTrip) {
  auto recs = synth_dataset({20, 24, 96, 0.05, 4});
  std::stringstream buf;
  write_dataset(buf, recs);
  auto back = read_dataset(buf, ColumnMapping{});
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(back[i].features, recs[i].features);
}

TEST(Normalizer, Examples) {
  std::vector<MetricsRecord> train(2);
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    train[0].features[j] = 0;
    train[1].features[j] = 10;
  }
  train[0].features[3] = train[1].features[3] = 7.0;  // constant
  auto n = Normalizer::fit(train);
  EXPECT_DOUBLE_EQ(n.normalize(0, 5.0), 0.5);
  EXPECT_EQ(n.normalize(3, 7.0), 0.0);
  EXPECT_EQ(n.normalize(3, 123.0), 0.0);
  EXPECT_DOUBLE_EQ(n.normalize(0, 25.0), 2.5);  // no clipping outside the range
  EXPECT_THROW(Normalizer::fit({}), UsageError);
}

TEST(Normalizer, TrainInUnitIntervalAndRoundTrip) {
  auto recs = synth_dataset({300, 24, 96, 0.1, 9});
  auto n = Normalizer::fit(recs);
  auto norm = n.apply(recs);
  for (const auto& r : norm) {
    for (double v : r.features) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  auto back = n.invert(norm);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      EXPECT_NEAR(back[i].features[j], recs[i].features[j], 1e-12);
    }
  }
}

TEST(Windows, CountArithmetic) {
  auto w = make_windows(ramp_records(10), 8, 1);
  EXPECT_EQ(w.size(), 3u);
  EXPECT_EQ(w[2].x.shape(), (Shape{8, 26}));
  EXPECT_EQ(w[2].x.at(0, 0), 2.0);
  EXPECT_EQ(make_windows(ramp_records(10), 3, 2).size(), 4u);
  EXPECT_THROW(make_windows(ramp_records(5), 8, 1), UsageError);
}

TEST(Windows, AbnormalIffAnyMemberAbnormal) {
  auto recs = ramp_records(12);
  recs[6].abnormal = true;
  auto w = make_windows(recs, 4, 1);
  for (const auto& s : w) {
    EXPECT_EQ(s.abnormal, s.start <= 6 && 6 < s.start + 4) << s.start;
  }
}

TEST(Split, Ratios) {
  auto s = split(plain_windows(100), SplitRatios{0.6, 0.2, 0.2});
  EXPECT_EQ(s.train.size(), 60u);
  EXPECT_EQ(s.val.size(), 20u);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_EQ(s.val.front().start, 60u);
  EXPECT_THROW(split(plain_windows(10), SplitRatios{0.5, 0.5, 0.5}), ConfigError);
  auto again = split(plain_windows(100), SplitRatios{0.6, 0.2, 0.2});
  EXPECT_EQ(again.test.back().x, s.test.back().x);
}

TEST(Split, PreparedShardHasNoBoundaryCrossing) {
  const std::size_t t = 8;
  auto shard = prepare_shard(synth_dataset({500, 24, 96, 0.05, 2}), {0.6, 0.2, 0.2}, t, 1, 3);
  auto range = [&](const std::vector<WindowedSample>& ws) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& w : ws) {
      lo = std::min(lo, w.start);
      hi = std::max(hi, w.start + t - 1);
      EXPECT_EQ(w.vm, 3u);
    }
    return std::make_pair(lo, hi);
  };
  auto [a0, a1] = range(shard.windows.train);
  auto [b0, b1] = range(shard.windows.val);
  auto [c0, c1] = range(shard.windows.test);
  EXPECT_EQ(a0, 0u);
  EXPECT_EQ(a1, 299u);
  EXPECT_EQ(b0, 300u);
  EXPECT_EQ(b1, 399u);
  EXPECT_EQ(c0, 400u);
  EXPECT_EQ(c1, 499u);
  EXPECT_EQ(shard.windows.train.size(), 300u - t + 1);
}

TEST(Injection, RateBelowOneWindowIsNoop) {
  auto w = plain_windows(50);
  auto out = inject_anomalies(w, {FaultType::cpu_endless_loop, 0.01, 2, 4, 7});
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(out[i].x, w[i].x);
    EXPECT_FALSE(out[i].abnormal);
  }
}

TEST(Injection, SeededSelectionOracle) {
  auto w = plain_windows(100);
  InjectionSpec spec{FaultType::cpu_endless_loop, 0.1, 2, 4, 11};
  auto out = inject_anomalies(w, spec);
  // Independent replay of the seeded partial shuffle.
  std::vector<std::size_t> idx(100);
  for (std::size_t i = 0; i < 100; ++i) idx[i] = i;
  Rng rng(derive_seed(11, {static_cast<std::uint64_t>(Stream::injection)}));
  for (std::size_t i = 0; i < 10; ++i) std::swap(idx[i], idx[i + rng.index(100 - i)]);
  std::set<std::size_t> expected(idx.begin(), idx.begin() + 10);
  std::size_t count = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(out[i].abnormal, expected.count(i) == 1) << i;
    count += out[i].abnormal;
  }
  EXPECT_EQ(count, 10u);
  auto again = inject_anomalies(w, spec);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(again[i].x, out[i].x);
  EXPECT_THROW(inject_anomalies(w, {FaultType::memory_leak, 1.0, 2, 4, 1}), UsageError);
  EXPECT_THROW(inject_anomalies(w, {FaultType::memory_leak, 0.0, 2, 4, 1}), UsageError);
}

TEST(Injection, TouchesOnlyTheFaultGroup) {
  auto w = plain_windows(40);
  for (FaultType f : kFaultTypes) {
    auto out = inject_anomalies(w, {f, 0.5, 2, 4, 5});
    const auto [lo, hi] = group_range(fault_group(f));
    std::size_t touched = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!out[i].abnormal) {
        EXPECT_EQ(out[i].x, w[i].x);
        continue;
      }
      EXPECT_EQ(out[i].fault, f);
      bool changed = false;
      for (std::size_t k = 0; k < w[i].x.dim(0); ++k) {
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
          const bool diff = out[i].x.at(k, j) != w[i].x.at(k, j);
          if (j < lo || j >= hi) EXPECT_FALSE(diff) << to_string(f) << " feature " << j;
          changed |= diff;
        }
      }
      EXPECT_TRUE(changed);
      ++touched;
    }
    EXPECT_EQ(touched, 20u);
  }
}

TEST(Injection, MixedAssignsAllFourFaults) {
  auto out = inject_mixed(plain_windows(200), {FaultType::none, 0.1, 2, 4, 8});
  std::map<FaultType, int> counts;
  for (const auto& w : out) {
    if (w.abnormal) ++counts[w.fault];
  }
  for (FaultType f : kFaultTypes) EXPECT_EQ(counts[f], 5);
}

TEST(Synth, DeterministicAndExactWithoutNoise) {
  SynthSpec spec{64, 24, 96, 0.0, 21};
  auto a = synth_dataset(spec);
  EXPECT_EQ(a.size(), 64u);
  auto profiles = synth_profiles(spec);
  for (std::size_t tau = 0; tau < a.size(); ++tau) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      EXPECT_EQ(a[tau].features[j], profiles[j].value(tau));
    }
  }
  spec.noise = 0.1;
  auto b = synth_dataset(spec), c = synth_dataset(spec);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].features, c[i].features);
  spec.seed = 22;
  EXPECT_NE(synth_dataset(spec)[5].features, b[5].features);
}

TEST(WindowStore, RoundTrip) {
  auto w = inject_mixed(plain_windows(30), {FaultType::none, 0.2, 2, 4, 1});
  w[3].vm = 7;
  auto path = (std::filesystem::temp_directory_path() / "fedgan_windows_test.ck").string();
  save_windows(path, w, {{"split", "test"}});
  auto back = load_windows(path);
  ASSERT_EQ(back.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(back[i].x, w[i].x);
    EXPECT_EQ(back[i].abnormal, w[i].abnormal);
    EXPECT_EQ(back[i].fault, w[i].fault);
    EXPECT_EQ(back[i].vm, w[i].vm);
    EXPECT_EQ(back[i].start, w[i].start);
  }
  std::filesystem::remove(path);
}
