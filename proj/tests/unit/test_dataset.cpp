#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "daan/dataset.hpp"
#include "daan/error.hpp"
#include "daan/image_io.hpp"
#include "daan/text.hpp"
#include "test_util.hpp"

using namespace daan;
using daan::test::TempDir;

namespace {

Sample make_sample(const std::string& id, Domain d, std::optional<LabelVector> labels, float fill = 0.5f) {
  Sample s;
  s.id = id;
  s.domain = d;
  s.image = Image(1, 4, 4, fill);
  s.labels = std::move(labels);
  return s;
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST(MajorityVote, StrictMajority) {
  const std::vector<LabelVector> votes{{1}, {1}, {0}};
  EXPECT_EQ(majority_vote(votes), (LabelVector{1}));
}

TEST(MajorityVote, TieResolvesToZero) {
  const std::vector<LabelVector> votes{{1}, {0}, {1}, {0}};
  EXPECT_EQ(majority_vote(votes), (LabelVector{0}));
}

TEST(MajorityVote, NeedsThreeVotes) {
  const std::vector<LabelVector> votes{{1}, {1}};
  EXPECT_THROW(majority_vote(votes), Error);
  const std::vector<LabelVector> ragged{{1}, {1, 0}, {0}};
  EXPECT_THROW(majority_vote(ragged), ShapeError);
}

TEST(MajorityVote, MatchesPerBitCount) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabelVector> votes(3 + trial % 4, LabelVector(4));
    for (auto& v : votes)
      for (auto& b : v) b = rng() & 1u;
    const auto got = majority_vote(votes);
    for (std::size_t i = 0; i < 4; ++i) {
      std::size_t ones = 0;
      for (const auto& v : votes) ones += v[i];
      const std::size_t zeros = votes.size() - ones;
      EXPECT_EQ(got[i], ones > zeros ? 1 : 0);
    }
  }
}

TEST(DatasetBuild, ValidatesSamples) {
  const auto schema = test::toy_schema();
  Dataset ds(schema, Domain::source);
  const LabelVector good{1, 0, 0, 0, 1, 1};
  ds.add(make_sample("a", Domain::source, good));
  EXPECT_THROW(ds.add(make_sample("a", Domain::source, good)), Error);
  EXPECT_THROW(ds.add(make_sample("b", Domain::target, good)), Error);
  EXPECT_THROW(ds.add(make_sample("c", Domain::source, std::nullopt)), Error);
  EXPECT_THROW(ds.add(make_sample("d", Domain::source, LabelVector{1, 1, 0, 0, 1, 1})), MutualExclusionViolation);
  Sample wrong = make_sample("e", Domain::source, good);
  wrong.image = Image(1, 5, 4);
  EXPECT_THROW(ds.add(wrong), ShapeError);
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.find("a"), std::optional<std::size_t>(0));
  EXPECT_FALSE(ds.find("zz"));
}

TEST(DatasetBuild, TargetMayBeUnlabeled) {
  Dataset ds(test::toy_schema(), Domain::target);
  ds.add(make_sample("t", Domain::target, std::nullopt));
  EXPECT_FALSE(ds.fully_labeled());
  UnlabeledView view(ds);
  EXPECT_EQ(view.size(), 1u);
  EXPECT_EQ(view.id(0), "t");
}

TEST(Manifest, WriteLoadRoundTrip) {
  TempDir dir("manifest");
  const auto schema = test::toy_schema();
  Dataset ds(schema, Domain::source);
  ds.add(make_sample("a", Domain::source, LabelVector{1, 0, 0, 0, 1, 1}, 0.25f));
  ds.add(make_sample("b", Domain::source, LabelVector{0, 1, 0, 1, 0, 0}, 0.75f));
  ds.add(make_sample("c", Domain::source, LabelVector{0, 0, 1, 1, 0, 1}, 1.0f));
  const auto manifest = dir.file("m.csv");
  write_manifest(manifest, dir.file("img"), ds);
  const auto text = read_text_file(manifest);
  EXPECT_EQ(text.substr(0, text.find('\n')), manifest_header(schema));
  EXPECT_NE(text.find("a,img/a.png,"), std::string::npos);

  const Dataset back = load_manifest(manifest, schema, Domain::source);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].id, ds[i].id);
    EXPECT_EQ(back[i].labels, ds[i].labels);
    ASSERT_TRUE(back[i].image.same_shape(ds[i].image));
    for (std::size_t p = 0; p < ds[i].image.pixels.size(); ++p)
      EXPECT_NEAR(back[i].image.pixels[p], ds[i].image.pixels[p], 1.0 / 65535);
  }
}

class ManifestErrors : public ::testing::Test {
 protected:
  void SetUp() override {
    write_png(dir.file("x.png"), Image(1, 4, 4, 0.5f), 16);
    header = manifest_header(schema) + "\n";
  }
  int row_of(const std::string& body, Domain d = Domain::source) {
    write_file(dir.file("m.csv"), header + body);
    try {
      load_manifest(dir.file("m.csv"), schema, d);
    } catch (const FormatError& e) {
      return e.row();
    }
    return -1;
  }
  TempDir dir{"manifest_err"};
  AttributeSchema schema = test::toy_schema();
  std::string header;
};

TEST_F(ManifestErrors, MissingLabelsOnSourceRow) {
  EXPECT_EQ(row_of("a,x.png,1,0,0,0,1,1\nb,x.png,,,,,,\n"), 3);
}

TEST_F(ManifestErrors, PartialLabels) { EXPECT_EQ(row_of("a,x.png,1,0,,0,1,1\n"), 2); }

TEST_F(ManifestErrors, NonBinaryToken) { EXPECT_EQ(row_of("a,x.png,1,0,2,0,1,1\n"), 2); }

TEST_F(ManifestErrors, ColumnCount) { EXPECT_EQ(row_of("a,x.png,1,0,0\n"), 2); }

TEST_F(ManifestErrors, Exclusivity) {
  write_file(dir.file("m.csv"), header + "a,x.png,1,1,0,0,1,1\n");
  try {
    load_manifest(dir.file("m.csv"), schema, Domain::source);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.row(), 2);
    EXPECT_NE(std::string(e.what()).find("age"), std::string::npos);
  }
}

TEST_F(ManifestErrors, BadHeader) {
  write_file(dir.file("m.csv"), "id,path,label_young\n");
  EXPECT_THROW(load_manifest(dir.file("m.csv"), schema, Domain::source), FormatError);
}

TEST_F(ManifestErrors, TargetRowsMayBeUnlabeled) {
  write_file(dir.file("m.csv"), header + "a,x.png,,,,,,\nb,x.png,1,0,0,0,1,1\n");
  const Dataset ds = load_manifest(dir.file("m.csv"), schema, Domain::target);
  EXPECT_FALSE(ds[0].labels);
  EXPECT_TRUE(ds[1].labels);
  EXPECT_EQ(ds.size(), 2u);
}

TEST(Votes, AggregatesAndReportsShortIds) {
  TempDir dir("votes");
  const auto schema = AttributeSchema::parse("bald: bald\nnose: big, small\n");
  const std::string header = "id,annotator,label_bald,label_big,label_small\n";
  write_file(dir.file("v.csv"), header +
                                    "p1,a,1,1,0\np1,b,1,1,0\np1,c,1,1,0\n"
                                    "p2,a,1,1,0\np2,b,0,0,1\np2,c,1,0,1\np2,d,0,0,1\n");
  const auto rows = aggregate_votes(dir.file("v.csv"), schema);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].first, "p1");
  EXPECT_EQ(rows[0].second, (LabelVector{1, 1, 0}));
  EXPECT_EQ(rows[1].second, (LabelVector{0, 0, 1}));

  write_file(dir.file("short.csv"), header + "p1,a,1,1,0\np1,b,1,1,0\np2,a,1,1,0\np2,b,1,1,0\np2,c,1,1,0\n");
  try {
    aggregate_votes(dir.file("short.csv"), schema);
    FAIL();
  } catch (const FormatError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("p1"), std::string::npos);
    EXPECT_EQ(what.find("p2"), std::string::npos);
  }
}
