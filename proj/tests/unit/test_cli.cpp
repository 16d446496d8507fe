#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "histo/cli/app.hpp"
#include "histo/cli/config.hpp"
#include "histo/cli/stages.hpp"
#include "histo/cli/synth.hpp"
#include "histo/error.hpp"
#include "histo/segment.hpp"
#include "oracles.hpp"

using namespace histo;
using namespace histo::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

// A small synthetic corpus shared by the end-to-end tests.
class SmallCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(oracle::scratch_dir("cli_corpus"));
    SynthOptions opts;
    opts.base_size = 192;
    opts.factors = {1, 2};
    synth_corpus(5, 6, 0.5, *root_ / "corpus", opts);
    std::ofstream(*root_ / "run.toml") << "seed = 11\n"
                                          "[paths]\ncorpus = \"corpus/corpus.csv\"\ntemplate = auto\n"
                                          "[segment]\nlevel = 0\n"
                                          "[tile]\nsize = 32\nstride = 32\n"
                                          "[stain]\niters = 20\nmax_pixels = 5000\n"
                                          "[eval]\nk_folds = 2\n";
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }

  static int run(const fs::path& out, std::vector<std::string> args) {
    args.insert(args.end(), {"--config", (*root_ / "run.toml").string(), "--out", out.string()});
    return run_cli(args);
  }

  static fs::path* root_;
};

fs::path* SmallCorpus::root_ = nullptr;

}  // namespace

TEST(Config, ParsesSectionsCommentsAndQuotes) {
  const ConfigValues v = parse_config_text(
      "seed = 3  # master\n"
      "[paths]\n"
      "corpus = \"a # b.csv\"\n"
      "\n"
      "[model]\n"
      "kind='forest'\n");
  EXPECT_EQ(v.at("seed"), "3");
  EXPECT_EQ(v.at("paths.corpus"), "a # b.csv");
  EXPECT_EQ(v.at("model.kind"), "forest");
  EXPECT_EQ(code_of([] { parse_config_text("[paths\n"); }), ErrorCode::ConfigInvalid);
}

TEST(Config, ValidationRules) {
  const fs::path dir = oracle::scratch_dir("cfg");
  std::ofstream(dir / "c.csv") << "slide_id,manifest,label\n";
  const ConfigValues base = {{"seed", "1"}, {"paths.corpus", "c.csv"}, {"paths.template", "auto"}};

  const PipelineConfig cfg = resolve_config(base, {}, dir);
  EXPECT_EQ(cfg.corpus, dir / "c.csv");
  EXPECT_FALSE(cfg.template_image.has_value());
  EXPECT_EQ(cfg.model_id, "svm-linear");

  ConfigValues no_seed = base;
  no_seed.erase("seed");
  EXPECT_EQ(code_of([&] { resolve_config(no_seed, {}, dir); }), ErrorCode::ConfigInvalid);

  ConfigValues no_template = base;
  no_template.erase("paths.template");
  EXPECT_EQ(code_of([&] { resolve_config(no_template, {}, dir); }), ErrorCode::ConfigInvalid);
  EXPECT_NO_THROW(resolve_config(no_template, {{"stain.enabled", "false"}}, dir));

  EXPECT_EQ(code_of([&] { resolve_config(base, {{"tile.sise", "3"}}, dir); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([&] { resolve_config(base, {{"tile.size", "big"}}, dir); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([&] { resolve_config(base, {{"paths.corpus", "nope.csv"}}, dir); }), ErrorCode::ConfigInvalid);

  const PipelineConfig a = resolve_config(base, {{"paths.out", "x"}}, dir);
  const PipelineConfig b = resolve_config(base, {{"paths.out", "y"}}, dir);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), resolve_config(base, {{"seed", "2"}}, dir).hash());
  EXPECT_EQ(resolve_config(base, {{"model.kind", "gbdt"}, {"features.pca", "true"}}, dir).model_id, "pca+gbdt");
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = oracle::scratch_dir("exit");
  std::ofstream(dir / "empty.csv") << "slide_id,manifest,label\n";
  const std::string corpus = (dir / "empty.csv").string();
  const std::string out = (dir / "out").string();

  EXPECT_EQ(run_cli({"segment", "--bogus-flag", "1"}), kExitConfig);
  EXPECT_EQ(run_cli({"pipeline", "--seed", "1", "--paths.corpus", corpus, "--out", out}), kExitConfig);
  EXPECT_EQ(run_cli({"segment", "--paths.corpus", corpus, "--paths.template", "auto", "--out", out}), kExitConfig);
  EXPECT_EQ(run_cli({"segment", "--seed", "1", "--paths.corpus", corpus, "--paths.template", "auto", "--out", out}),
            kExitMissingInput);
  EXPECT_EQ(run_cli({"tile", "--seed", "1", "--paths.corpus", corpus, "--paths.template", "auto", "--out", out}),
            kExitMissingInput);
  EXPECT_EQ(exit_code_for(ErrorCode::ConfigInvalid, true), kExitConfig);
  EXPECT_EQ(exit_code_for(ErrorCode::DegenerateData, true), kExitStageFailure);
  fs::remove_all(dir);
}

TEST(Corpus, ReadErrors) {
  const fs::path dir = oracle::scratch_dir("corpus_errors");
  EXPECT_EQ(code_of([&] { read_corpus(dir / "missing.csv"); }), ErrorCode::MissingInput);
  std::ofstream(dir / "empty.csv") << "slide_id,manifest,label\n";
  EXPECT_EQ(code_of([&] { read_corpus(dir / "empty.csv"); }), ErrorCode::CorpusEmpty);
  std::ofstream(dir / "dup.csv") << "slide_id,manifest,label\na,a.json,tumor\na,b.json,benign\n";
  EXPECT_EQ(code_of([&] { read_corpus(dir / "dup.csv"); }), ErrorCode::ParseError);
  std::ofstream(dir / "header.csv") << "id,path\na,a.json\n";
  EXPECT_EQ(code_of([&] { read_corpus(dir / "header.csv"); }), ErrorCode::ParseError);
  fs::remove_all(dir);
}

TEST(Synth, TwoSlidesOnePerClassAndDeterministic) {
  const fs::path dir = oracle::scratch_dir("synth_two");
  SynthOptions opts;
  opts.base_size = 128;
  opts.factors = {1, 2};
  const fs::path corpus = synth_corpus(3, 2, 0.5, dir / "a", opts);
  synth_corpus(3, 2, 0.5, dir / "b", opts);
  const auto entries = read_corpus(corpus);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_NE(entries[0].label, entries[1].label);
  EXPECT_EQ(tree_contents(dir / "a"), tree_contents(dir / "b"));
  synth_corpus(4, 2, 0.5, dir / "c", opts);
  EXPECT_NE(tree_contents(dir / "a"), tree_contents(dir / "c"));
  EXPECT_EQ(code_of([&] { synth_corpus(3, 1, 0.5, dir / "d", opts); }), ErrorCode::InvalidArgument);
  fs::remove_all(dir);
}

TEST(Synth, EverySlideHasTissue) {
  SynthOptions opts;
  opts.base_size = 256;
  for (int i = 0; i < 8; ++i) {
    const SynthSlide s = synth_slide(42, i, i % 2 ? Label::Tumor : Label::Benign, opts);
    const SegmentResult r = build_mask(s.base, SegmentParams{});
    EXPECT_GT(r.mask.count(), 0u) << s.slide_id;
    EXPECT_LT(r.mask.count(), static_cast<std::size_t>(256 * 256)) << s.slide_id;
  }
}

TEST_F(SmallCorpus, SegmentWritesMasksAndComponents) {
  const fs::path out = *root_ / "seg";
  ASSERT_EQ(run(out, {"segment"}), kExitOk);
  for (const auto& e : read_corpus(*root_ / "corpus" / "corpus.csv")) {
    EXPECT_TRUE(fs::exists(out / "segment" / (e.slide_id + "_mask.png")));
    EXPECT_TRUE(fs::exists(out / "segment" / (e.slide_id + "_components.csv")));
  }
  std::ifstream slides(out / "segment" / "slides.csv");
  std::string line;
  std::getline(slides, line);
  int rows = 0;
  while (std::getline(slides, line)) {
    ++rows;
    EXPECT_NE(line.substr(line.rfind(',') + 1), "0") << line;
  }
  EXPECT_EQ(rows, 6);
}

TEST_F(SmallCorpus, StagesEqualPipelineAndRerunsAreIdentical) {
  const fs::path whole = *root_ / "whole";
  const fs::path again = *root_ / "again";
  const fs::path staged = *root_ / "staged";
  ASSERT_EQ(run(whole, {"pipeline"}), kExitOk);
  ASSERT_EQ(run(again, {"pipeline"}), kExitOk);
  for (const char* stage : {"segment", "tile", "normalize", "featurize", "train", "evaluate"})
    ASSERT_EQ(run(staged, {stage}), kExitOk) << stage;

  const auto payload = read_report_payload(whole);
  EXPECT_EQ(payload.dump(), read_report_payload(again).dump());
  EXPECT_EQ(payload.dump(), read_report_payload(staged).dump());
  EXPECT_EQ(slurp(whole / "train" / "model.json"), slurp(staged / "train" / "model.json"));
  EXPECT_EQ(slurp(whole / "features" / "features.bin"), slurp(staged / "features" / "features.bin"));
  EXPECT_EQ(slurp(whole / "evaluate" / "roc.csv"), slurp(staged / "evaluate" / "roc.csv"));

  ASSERT_EQ(run(whole, {"evaluate"}), kExitOk);
  EXPECT_EQ(payload.dump(), read_report_payload(whole).dump());

  EXPECT_TRUE(fs::exists(whole / "normalize" / "target_stain.json"));
  EXPECT_EQ(payload.at("metadata").at("config_hash").get<std::string>().size(), 64u);
}

TEST_F(SmallCorpus, FeatureTableRoundTrip) {
  const fs::path out = *root_ / "features_rt";
  ASSERT_EQ(run(out, {"pipeline", "--stain.enabled", "false", "--model.kind", "forest", "--model.n_trees", "5"}),
            kExitOk);
  const FeatureTable t = read_features(out / "features");
  EXPECT_EQ(t.values.rows(), static_cast<Eigen::Index>(t.labels.size()));
  EXPECT_EQ(t.values.cols(), 32 * 32 * 3);
  EXPECT_FALSE(fs::exists(out / "normalize" / "target_stain.json"));
  write_features(out / "copy", t, "h");
  const FeatureTable back = read_features(out / "copy");
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.paths, t.paths);
  EXPECT_EQ(back.labels, t.labels);
}
