#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histo/stain.hpp"
#include "histo/tile.hpp"

namespace histo::cli {

struct CorpusEntry {
  std::string slide_id;
  std::filesystem::path manifest;  // absolute after read_corpus
  Label label = Label::Benign;
};

/// CSV with header `slide_id,manifest,label`; manifest paths are relative to
/// the corpus file. Throws MissingInput, ParseError or CorpusEmpty.
std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusEntry>& entries);

struct SynthOptions {
  int base_size = 1024;
  std::vector<int> factors = {1, 2, 4, 8};
};

/// Parameters of one generated slide, exposed for tests.
struct SynthSlide {
  std::string slide_id;
  Label label = Label::Benign;
  StainMatrix W;
  RgbImage base;
};

SynthSlide synth_slide(std::uint64_t seed, int index, Label label, const SynthOptions& options = {});

/// Writes one pyramid per slide plus corpus.csv under out_dir and returns the
/// corpus path. round(n_slides * class_balance) slides are tumor.
std::filesystem::path synth_corpus(std::uint64_t seed, int n_slides, double class_balance,
                                   const std::filesystem::path& out_dir, const SynthOptions& options = {});

}  // namespace histo::cli
