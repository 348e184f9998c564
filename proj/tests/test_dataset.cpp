#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "vtreid/checkpoint.hpp"
#include "vtreid/dataset.hpp"
#include "vtreid/error.hpp"
#include "vtreid/trainer.hpp"

using namespace vtreid;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() /
                       ("vtreid-test-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::optional<Errc> code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TrainConfig small_config() {
  TrainConfig c;
  c.iterations = 6;
  c.batch_size = 8;
  c.hidden_dim = 8;
  c.embed_dim = 4;
  c.queue_capacity = 16;
  c.seed = 3;
  return c;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.identities = 4;
  s.samples_per_identity = 4;
  s.visual_dim = 5;
  s.text_dim = 3;
  s.seed = 9;
  return s;
}

}  // namespace

TEST(Jsonl, TwoLines) {
  const auto recs = parse_jsonl(
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[1,2]})"
      "\n"
      R"({"id":"a","identity":1,"camera":1,"modality":"text","vector":[0.5]})"
      "\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].modality, Modality::text);
  EXPECT_EQ(recs[1].vector, Vec64{0.5});
  const FeatureDataset ds(recs);
  EXPECT_EQ(ds.samples().size(), 1u);
  EXPECT_EQ(ds.visual_dim(), 2u);
  EXPECT_EQ(ds.text_dim(), 1u);
}

TEST(Jsonl, DimInconsistentNamesLine) {
  const std::string text =
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[1,2,3,4]})"
      "\n"
      R"({"id":"b","identity":1,"camera":1,"modality":"visual","vector":[1,2,3,4,5]})"
      "\n";
  EXPECT_EQ(code_of([&] { FeatureDataset(parse_jsonl(text)); }), Errc::DimInconsistent);
  EXPECT_NE(message_of([&] { FeatureDataset(parse_jsonl(text)); }).find("line 2"), std::string::npos);
}

TEST(Jsonl, DuplicateId) {
  const std::string text =
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[1]})"
      "\n"
      R"({"id":"a","identity":2,"camera":1,"modality":"visual","vector":[2]})"
      "\n";
  EXPECT_EQ(code_of([&] { FeatureDataset(parse_jsonl(text)); }), Errc::DuplicateId);
}

TEST(Jsonl, RejectsBadLines) {
  const char* bad[] = {
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[NaN]})",
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[Infinity]})",
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[1e999]})",
      R"({"id":"a","identity":1,"camera":1,"modality":"audio","vector":[1]})",
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":["x"]})",
      R"({"id":"a","identity":1,"camera":1,"modality":"visual"})",
      R"({"id":"a","identity":0,"camera":1,"modality":"visual","vector":[1]})",
      R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[]})",
      R"(not json)",
  };
  for (const char* line : bad) {
    const std::string text = std::string(R"({"id":"z","identity":1,"camera":1,"modality":"visual","vector":[1]})") +
                             "\n" + line + "\n";
    EXPECT_EQ(code_of([&] { FeatureDataset(parse_jsonl(text)); }), Errc::ParseError) << line;
    EXPECT_NE(message_of([&] { FeatureDataset(parse_jsonl(text)); }).find("line 2"), std::string::npos)
        << line;
  }
}

TEST(Jsonl, SkipsBlankLines) {
  const auto recs = parse_jsonl(
      "\n" R"({"id":"a","identity":1,"camera":1,"modality":"visual","vector":[1]})" "\n\n");
  EXPECT_EQ(recs.size(), 1u);
}

TEST(Dataset, ModalityDisagreement) {
  std::vector<FeatureRecord> recs = {{"a", 1, 1, Modality::visual, {1.0}},
                                     {"a", 2, 1, Modality::text, {1.0}}};
  EXPECT_EQ(code_of([&] { FeatureDataset{recs}; }), Errc::ParseError);
}

TEST(Dataset, SplitsAreDisjoint) {
  const FeatureDataset ds = synth_generate(small_spec(), {0.5, 2});
  const auto& sp = ds.splits();
  std::set<int> train_ids, eval_ids;
  for (const auto& id : sp.train) train_ids.insert(ds.sample(id).identity);
  for (const auto& id : sp.query) eval_ids.insert(ds.sample(id).identity);
  for (const auto& id : sp.gallery) EXPECT_TRUE(eval_ids.contains(ds.sample(id).identity));
  EXPECT_EQ(train_ids, (std::set<int>{1, 2}));
  EXPECT_EQ(eval_ids, (std::set<int>{3, 4}));
  EXPECT_EQ(sp.train.size(), 8u);
  EXPECT_EQ(sp.query.size(), 4u);
  EXPECT_EQ(sp.gallery.size(), 4u);
}

TEST(Dataset, BinaryAndJsonRoundTrip) {
  const fs::path dir = scratch_dir();
  const FeatureDataset ds = synth_generate(small_spec());
  save_dataset_jsonl(ds, dir / "d.jsonl");
  save_dataset_binary(ds, dir / "d.bin");
  EXPECT_EQ(load_dataset(dir / "d.jsonl").records(), ds.records());
  EXPECT_EQ(load_dataset(dir / "d.bin").records(), ds.records());

  std::string bytes = slurp(dir / "d.bin");
  spit(dir / "t.bin", bytes.substr(0, bytes.size() - 3));
  EXPECT_EQ(code_of([&] { load_dataset(dir / "t.bin"); }), Errc::ParseError);
  EXPECT_EQ(code_of([&] { load_dataset(dir / "missing.jsonl"); }), Errc::IoError);
}

TEST(Synth, Deterministic) {
  EXPECT_EQ(synth_generate(small_spec()).records(), synth_generate(small_spec()).records());
  SynthSpec other = small_spec();
  other.seed = 10;
  EXPECT_NE(synth_generate(other).records(), synth_generate(small_spec()).records());
}

TEST(Synth, NoiselessIsSeparable) {
  SynthSpec s;
  s.noise = 0.0;
  s.seed = 4;
  const FeatureDataset ds = synth_generate(s);
  for (const auto& [id, sample] : ds.samples()) {
    const std::string peer = id.substr(0, 5) + "_s000";
    EXPECT_EQ(ds.vector(id, Modality::visual), ds.vector(peer, Modality::visual));
    EXPECT_EQ(ds.vector(id, Modality::text), ds.vector(peer, Modality::text));
  }
  EXPECT_EQ(evaluate_raw(ds, 0.5).mAP, 1.0);
  EXPECT_EQ(evaluate_raw(ds, 1.0).mAP, 1.0);
  EXPECT_EQ(evaluate_raw(ds, 0.0).mAP, 1.0);
}

TEST(Synth, WideSpreadRawRetrieval) {
  SynthSpec s;
  s.cluster_spread = 10.0;
  s.noise = 0.5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    s.seed = seed;
    EXPECT_GE(evaluate_raw(synth_generate(s), 0.5).mAP, 0.9);
  }
}

TEST(Synth, RandomSpecsSatisfyInvariants) {
  std::mt19937_64 gen(60);
  std::uniform_int_distribution<std::size_t> ids(2, 12), per(1, 6), dim(1, 10);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    SynthSpec s{ids(gen), per(gen), dim(gen), dim(gen), 0.1 + u(gen), u(gen), gen()};
    const FeatureDataset ds = synth_generate(s);
    ASSERT_EQ(ds.records().size(), 2 * s.identities * s.samples_per_identity);
    EXPECT_EQ(ds.identity_count(), s.identities);
    EXPECT_EQ(ds.visual_dim(), s.visual_dim);
    EXPECT_EQ(ds.text_dim(), s.text_dim);
    for (const auto& [id, sample] : ds.samples()) {
      EXPECT_TRUE(sample.visual && sample.text);
      EXPECT_TRUE(all_finite(ds.vector(id, Modality::text)));
    }
    // Re-validating the records must succeed.
    EXPECT_NO_THROW(FeatureDataset{ds.records()});
  }
}

TEST(Synth, BadSpec) {
  SynthSpec s = small_spec();
  s.identities = 1;
  EXPECT_EQ(code_of([&] { synth_generate(s); }), Errc::BadSpec);
  s = small_spec();
  s.noise = -1.0;
  EXPECT_EQ(code_of([&] { synth_generate(s); }), Errc::BadSpec);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  const fs::path dir = scratch_dir();
  const FeatureDataset ds = synth_generate(small_spec());
  const TrainResult r = train(small_config(), ds);
  save_checkpoint(r.state, dir / "a.ck");
  const TrainState loaded = load_checkpoint(dir / "a.ck");
  EXPECT_EQ(loaded, r.state);
  save_checkpoint(loaded, dir / "b.ck");
  EXPECT_EQ(slurp(dir / "a.ck"), slurp(dir / "b.ck"));
  EXPECT_FALSE(fs::exists(dir / "a.ck.tmp"));
}

TEST(Checkpoint, CorruptionDetected) {
  const FeatureDataset ds = synth_generate(small_spec());
  const std::string bytes = encode_checkpoint(train(small_config(), ds).state);
  for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{8}}) {
    EXPECT_EQ(code_of([&] { decode_checkpoint(bytes.substr(0, cut)); }), Errc::ChecksumMismatch);
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_EQ(code_of([&] { decode_checkpoint(flipped); }), Errc::ChecksumMismatch);
  std::string version = bytes;
  version[4] = 7;
  EXPECT_EQ(code_of([&] { decode_checkpoint(version); }), Errc::VersionMismatch);
  EXPECT_EQ(code_of([&] { decode_checkpoint("nope, not a checkpoint"); }), Errc::IoError);
}

TEST(Checkpoint, ResumeMatchesUninterrupted) {
  const fs::path dir = scratch_dir();
  const FeatureDataset ds = synth_generate(small_spec());
  TrainConfig full = small_config();
  full.iterations = 10;
  const TrainResult whole = train(full, ds);

  TrainConfig half = full;
  half.iterations = 4;
  const TrainResult first = train(half, ds);
  save_checkpoint(first.state, dir / "mid.ck");
  const TrainResult second = train(full, ds, load_checkpoint(dir / "mid.ck"));

  std::vector<LossRecord> joined = first.trace;
  joined.insert(joined.end(), second.trace.begin(), second.trace.end());
  EXPECT_EQ(joined, whole.trace);
  EXPECT_EQ(second.state, whole.state);
}
