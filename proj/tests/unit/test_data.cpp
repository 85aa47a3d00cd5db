#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "crossadapt/data.hpp"
#include "crossadapt/error.hpp"
#include "crossadapt/shift.hpp"

using namespace crossadapt;
namespace fs = std::filesystem;

namespace {

template <typename F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error raised";
  return Error(ErrorKind::Io, "none");
}

data::Dataset ordered(std::size_t n) {
  data::Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.label.push_back(static_cast<double>(i % 2));
    d.timestamp.push_back(static_cast<std::int64_t>(i));
  }
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("crossadapt_" + name); }

}  // namespace

TEST(Preprocess, LogTransform) {
  EXPECT_EQ(data::transform_numerical(8.0), 3.0);
  EXPECT_EQ(data::transform_numerical(1024.0), 10.0);
  EXPECT_EQ(data::transform_numerical(2.0), 2.0);
  EXPECT_EQ(data::transform_numerical(-5.0), -5.0);
  EXPECT_EQ(data::transform_numerical(1.5), 1.5);
}

TEST(Preprocess, RareTokensBecomeUnk) {
  data::RawTable raw;
  raw.categorical_names = {"site"};
  raw.categorical = {{}};
  for (int i = 0; i < 9; ++i) raw.categorical[0].push_back("rare");
  for (int i = 0; i < 10; ++i) raw.categorical[0].push_back("common");
  raw.label.assign(19, 0.0);
  for (int i = 0; i < 19; ++i) raw.timestamp.push_back(i);
  const auto pre = data::preprocess(raw, 10);
  EXPECT_EQ(pre.vocab.lookup(0, "rare"), data::Vocabulary::kUnk);
  EXPECT_EQ(pre.vocab.lookup(0, "common"), 1u);
  EXPECT_EQ(pre.vocab.lookup(0, "never-seen"), data::Vocabulary::kUnk);
  EXPECT_EQ(pre.schema.fields[0].vocab_size, 2u);
  EXPECT_EQ(pre.samples.categorical[0][0], 0u);
  EXPECT_EQ(pre.samples.categorical[0][18], 1u);
  const auto back = data::Vocabulary::from_json(pre.vocab.to_json());
  EXPECT_EQ(back.lookup(0, "common"), 1u);
}

TEST(Preprocess, VocabularyOnlySeesVisibleRows) {
  data::RawTable raw;
  raw.categorical_names = {"f"};
  raw.categorical = {{"a", "a", "b", "b"}};
  raw.label = {0, 1, 0, 1};
  raw.timestamp = {0, 1, 2, 3};
  const auto pre = data::preprocess(raw, 2, 2);
  EXPECT_EQ(pre.vocab.lookup(0, "b"), data::Vocabulary::kUnk);
  EXPECT_EQ(pre.samples.categorical[0][3], 0u);
}

TEST(Split, StandardRatios) {
  const auto s = data::split_temporal(ordered(100000), {4, 4, 1, 1});
  EXPECT_EQ(s.hist(data::HistReader::Teacher).size(), 40000u);
  EXPECT_EQ(s.train().size(), 40000u);
  EXPECT_EQ(s.online().size(), 10000u);
  EXPECT_EQ(s.test().size(), 10000u);
  const auto c = data::split_temporal(ordered(200000), {10, 8, 1, 1});
  EXPECT_EQ(c.hist(data::HistReader::Teacher).size(), 100000u);
  EXPECT_EQ(c.train().size(), 80000u);
  EXPECT_EQ(c.online().size(), 10000u);
  EXPECT_EQ(c.test().size(), 10000u);
  EXPECT_EQ(c.boundaries()[2], 180000u);
  EXPECT_LT(c.hist(data::HistReader::Teacher).timestamp.back(), c.train().timestamp.front());
  EXPECT_LT(c.train().timestamp.back(), c.online().timestamp.front());
  EXPECT_LT(c.online().timestamp.back(), c.test().timestamp.front());
}

TEST(Split, EmptyHistAndAccessControl) {
  const auto s = data::split_temporal(ordered(30), {0, 1, 1, 1});
  EXPECT_FALSE(s.has_hist());
  EXPECT_EQ(s.train().size(), 10u);
  EXPECT_EQ(error_of([&] { s.hist(data::HistReader::Student); }).kind(), ErrorKind::State);
  EXPECT_EQ(error_of([] { data::split_temporal(ordered(5), {4, 4, 1, 1}); }).kind(), ErrorKind::Data);
}

TEST(Split, TiesNeverStraddle) {
  auto d = ordered(100);
  for (auto& t : d.timestamp) t /= 4;
  const auto s = data::split_temporal(d, {4, 4, 1, 1});
  EXPECT_LT(s.train().timestamp.back(), s.online().timestamp.front());
  EXPECT_LT(s.online().timestamp.back(), s.test().timestamp.front());
}

TEST(Generator, DeterministicBytes) {
  data::SyntheticSpec spec;
  spec.n_samples = 3000;
  spec.drift = {{0.5, 1.0, true}};
  data::write_csv(data::generate_stream(spec), temp("gen_a.csv"));
  data::write_csv(data::generate_stream(spec), temp("gen_b.csv"));
  EXPECT_EQ(slurp(temp("gen_a.csv")), slurp(temp("gen_b.csv")));
  spec.seed = 2;
  data::write_csv(data::generate_stream(spec), temp("gen_b.csv"));
  EXPECT_NE(slurp(temp("gen_a.csv")), slurp(temp("gen_b.csv")));
  fs::remove(temp("gen_a.csv"));
  fs::remove(temp("gen_b.csv"));
}

TEST(Generator, BaseRate) {
  data::SyntheticSpec spec;
  spec.base_rate = 0.03;
  const auto raw = data::generate_stream(spec);
  ASSERT_EQ(raw.size(), 200000u);
  double pos = 0.0;
  for (double y : raw.label) pos += y;
  EXPECT_NEAR(pos / 200000.0, 0.03, 0.005);
}

TEST(Generator, StationaryStreamHasLowShift) {
  data::SyntheticSpec spec;
  const auto pre = data::preprocess(data::generate_stream(spec), 10);
  const auto rep = shift::compute_shift(pre.samples, pre.schema, {});
  EXPECT_LT(rep.delta_shift, 0.01);
}

TEST(Generator, AbruptDriftPeaksAtStraddlingPair) {
  data::SyntheticSpec spec;
  spec.n_samples = 100000;
  spec.drift = {{0.5, 2.0, true}};
  const auto pre = data::preprocess(data::generate_stream(spec), 10);
  const auto rep = shift::compute_shift(pre.samples, pre.schema, {});
  const auto top = std::max_element(rep.pair_means.begin(), rep.pair_means.end()) - rep.pair_means.begin();
  EXPECT_EQ(top, 4);
}

TEST(Generator, PcvrLabelsOnlyOnClicks) {
  data::SyntheticSpec spec;
  spec.n_samples = 20000;
  spec.pcvr = true;
  const auto raw = data::generate_stream(spec);
  ASSERT_TRUE(raw.has_click());
  std::size_t clicks = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    clicks += raw.click[i];
    if (raw.label[i] > 0.5) {
      EXPECT_EQ(raw.click[i], 1);
    }
  }
  EXPECT_GT(clicks, 0u);
  EXPECT_LT(clicks, raw.size() / 2);
}

TEST(Generator, SpecValidationAndJson) {
  data::SyntheticSpec spec;
  spec.drift = {{0.6, 1.0, false}, {0.4, 1.0, false}};
  EXPECT_EQ(error_of([&] { spec.validate(); }).kind(), ErrorKind::Validation);
  spec.drift = {{0.3, 0.5, true}};
  const auto back = data::SyntheticSpec::from_json(spec.to_json());
  EXPECT_EQ(back.drift, spec.drift);
  EXPECT_EQ(back.vocab_sizes, spec.vocab_sizes);
}

TEST(Csv, RoundTripIsExact) {
  data::SyntheticSpec spec;
  spec.n_samples = 2000;
  spec.pcvr = true;
  const auto raw = data::generate_stream(spec);
  const auto schema = data::write_csv(raw, temp("rt.csv"));
  const auto back = data::load_csv(temp("rt.csv"), schema).table;
  EXPECT_EQ(back.numerical, raw.numerical);
  EXPECT_EQ(back.categorical, raw.categorical);
  EXPECT_EQ(back.label, raw.label);
  EXPECT_EQ(back.click, raw.click);
  EXPECT_EQ(back.timestamp, raw.timestamp);
  const auto again = data::CsvSchema::from_json(schema.to_json());
  EXPECT_EQ(again.columns.size(), schema.columns.size());
  fs::remove(temp("rt.csv"));
}

TEST(Csv, BadRowIsNamed) {
  {
    std::ofstream out(temp("bad.csv"));
    out << "ts,y,x,c\n0,1,0.5,a\n1,0,oops,b\n2,1,1.5,a\n";
  }
  data::CsvSchema schema;
  schema.columns = {{"ts", data::ColumnKind::Timestamp},
                    {"y", data::ColumnKind::Label},
                    {"x", data::ColumnKind::Numerical},
                    {"c", data::ColumnKind::Categorical}};
  const auto e = error_of([&] { data::load_csv(temp("bad.csv"), schema); });
  EXPECT_EQ(e.kind(), ErrorKind::Data);
  EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  schema.strict = false;
  const auto lenient = data::load_csv(temp("bad.csv"), schema);
  EXPECT_EQ(lenient.skipped_rows, 1u);
  EXPECT_EQ(lenient.table.size(), 2u);
  schema.columns.push_back({"missing", data::ColumnKind::Numerical});
  EXPECT_EQ(error_of([&] { data::load_csv(temp("bad.csv"), schema); }).kind(), ErrorKind::Schema);
  fs::remove(temp("bad.csv"));
}

TEST(Csv, CriteoShapedTabFile) {
  data::CsvSchema schema;
  schema.delimiter = '\t';
  schema.columns.push_back({"label", data::ColumnKind::Label});
  std::ostringstream header, row;
  header << "label";
  row << "1";
  for (int i = 1; i <= 13; ++i) {
    schema.columns.push_back({"I" + std::to_string(i), data::ColumnKind::Numerical});
    header << "\tI" << i;
    row << '\t' << (i == 3 ? "" : std::to_string(i * 3));
  }
  for (int i = 1; i <= 26; ++i) {
    schema.columns.push_back({"C" + std::to_string(i), data::ColumnKind::Categorical});
    header << "\tC" << i;
    row << "\t" << std::hex << (0x1a2b + i) << std::dec;
  }
  {
    std::ofstream out(temp("criteo.tsv"));
    out << header.str() << '\n' << row.str() << '\n' << row.str() << '\n';
  }
  const auto t = data::load_csv(temp("criteo.tsv"), schema).table;
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.numerical.size(), 13u);
  EXPECT_EQ(t.categorical.size(), 26u);
  EXPECT_EQ(t.numerical[2][0], 0.0);
  EXPECT_EQ(t.timestamp[1], 1);
  fs::remove(temp("criteo.tsv"));
}

TEST(DatasetOps, SelectSliceAppend) {
  const auto d = ordered(10);
  const std::vector<std::size_t> rows{3, 3, 7};
  const auto s = d.select(rows);
  EXPECT_EQ(s.timestamp, (std::vector<std::int64_t>{3, 3, 7}));
  auto a = d.slice(0, 4);
  a.append(d.slice(4, 10));
  EXPECT_EQ(a.fingerprint(), d.fingerprint());
  EXPECT_TRUE(d.is_time_sorted());
  EXPECT_FALSE(s.select(std::vector<std::size_t>{2, 0}).is_time_sorted());
}
