#include "histo/cli/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "histo/error.hpp"
#include "histo/pyramid.hpp"
#include "histo/rng.hpp"

namespace histo::cli {

namespace fs = std::filesystem;

std::vector<CorpusEntry> read_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, "corpus manifest not found: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("slide_id,manifest,label", 0) != 0) {
    throw Error(ErrorCode::ParseError, path.string() + ": expected header slide_id,manifest,label");
  }
  std::vector<CorpusEntry> entries;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 3) throw Error(ErrorCode::ParseError, path.string() + ": bad row '" + line + "'");
    CorpusEntry e;
    e.slide_id = fields[0];
    fs::path manifest(fields[1]);
    e.manifest = manifest.is_absolute() ? manifest : path.parent_path() / manifest;
    e.label = parse_label(fields[2]);
    if (e.label == Label::Unlabeled) {
      throw Error(ErrorCode::ParseError, path.string() + ": slide " + e.slide_id + " must be benign or tumor");
    }
    for (const auto& other : entries) {
      if (other.slide_id == e.slide_id) throw Error(ErrorCode::ParseError, "duplicate slide id " + e.slide_id);
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw Error(ErrorCode::CorpusEmpty, path.string() + " lists no slides");
  return entries;
}

void write_corpus(const fs::path& path, const std::vector<CorpusEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "slide_id,manifest,label\n";
  for (const auto& e : entries) {
    out << e.slide_id << ',' << e.manifest.generic_string() << ',' << to_string(e.label) << '\n';
  }
}

namespace {

struct Wave {
  double kx, ky, phase;
};

// Sum of three plane waves with random orientation, normalized to [-1, 1].
std::vector<Wave> draw_waves(Rng& rng, double min_wavelength, double max_wavelength) {
  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double k = 2.0 * std::numbers::pi / rng.uniform(min_wavelength, max_wavelength);
    waves.push_back({k * std::cos(angle), k * std::sin(angle), rng.uniform(0.0, 2.0 * std::numbers::pi)});
  }
  return waves;
}

double texture(const std::vector<Wave>& waves, double x, double y) {
  double t = 0.0;
  for (const auto& w : waves) t += std::cos(w.kx * x + w.ky * y + w.phase);
  return t / static_cast<double>(waves.size());
}

struct Ellipse {
  double cx, cy, a, b, cos_t, sin_t;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double u = (dx * cos_t + dy * sin_t) / a;
    const double v = (-dx * sin_t + dy * cos_t) / b;
    return u * u + v * v <= 1.0;
  }
};

}  // namespace

SynthSlide synth_slide(std::uint64_t seed, int index, Label label, const SynthOptions& options) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(index), hash_string("slide")}));
  const int n = options.base_size;
  const double s = n / 1024.0;  // geometry is specified for a 1024 px base

  SynthSlide slide;
  char id[32];
  std::snprintf(id, sizeof id, "slide_%03d", index);
  slide.slide_id = id;
  slide.label = label;

  slide.W = reference_stain_matrix();
  for (Eigen::Index i = 0; i < slide.W.size(); ++i) {
    slide.W.data()[i] = std::max(0.0, slide.W.data()[i] + rng.uniform(-0.05, 0.05));
  }
  slide.W.colwise().normalize();

  // Hematoxylin "nuclei" where the texture exceeds `cut`, eosin stroma elsewhere.
  // Tumor: dense small nuclei. Benign: sparse broad hematoxylin regions.
  const bool tumor = label == Label::Tumor;
  const double h0 = (tumor ? 0.9 : 0.6) * rng.uniform(0.9, 1.1);
  const double e0 = (tumor ? 0.45 : 0.8) * rng.uniform(0.9, 1.1);
  const double cut = tumor ? 0.0 : 0.6;
  const auto waves_h = tumor ? draw_waves(rng, 24.0 * s, 40.0 * s) : draw_waves(rng, 200.0 * s, 320.0 * s);
  const auto waves_e = tumor ? draw_waves(rng, 24.0 * s, 40.0 * s) : draw_waves(rng, 200.0 * s, 320.0 * s);

  std::vector<Ellipse> blobs;
  const int n_blobs = rng.coin() ? 2 : 1;
  for (int i = 0; i < n_blobs; ++i) {
    const double theta = rng.uniform(0.0, std::numbers::pi);
    blobs.push_back({rng.uniform(0.35, 0.65) * n, rng.uniform(0.35, 0.65) * n, rng.uniform(0.22, 0.32) * n,
                     rng.uniform(0.16, 0.26) * n, std::cos(theta), std::sin(theta)});
  }
  std::vector<Ellipse> specks;
  const int n_specks = rng.uniform_int(3, 6);
  for (int i = 0; i < n_specks; ++i) {
    const double r = rng.uniform(2.0, 5.0) * s;
    specks.push_back({rng.uniform(0.05, 0.95) * n, rng.uniform(0.05, 0.95) * n, r, r, 1.0, 0.0});
  }

  slide.base.width = n;
  slide.base.height = n;
  slide.base.data.assign(static_cast<std::size_t>(3) * n * n, 255);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      std::uint8_t* px = slide.base.at(x, y);
      const double fx = x + 0.5;
      const double fy = y + 0.5;
      bool inside = false;
      for (const auto& b : blobs) inside = inside || b.contains(fx, fy);
      bool speck = false;
      for (const auto& b : specks) speck = speck || b.contains(fx, fy);
      if (!inside && !speck) {
        const auto v = static_cast<std::uint8_t>(255 - rng.below(3));
        px[0] = px[1] = px[2] = v;
        continue;
      }
      const double nucleus = std::clamp((texture(waves_h, fx, fy) - cut) * 2.5, 0.0, 1.0);
      double ch = 0.03 + h0 * nucleus;
      double ce = e0 * (1.0 - 0.85 * nucleus) * (1.0 + 0.2 * texture(waves_e, fx, fy));
      ch = std::max(0.0, ch + rng.normal() * 0.03);
      ce = std::max(0.0, ce + rng.normal() * 0.03);
      const Eigen::Vector3d od = slide.W * Eigen::Vector2d(ch, ce);
      for (int c = 0; c < 3; ++c) px[c] = od_to_byte(od[c]);
    }
  }
  return slide;
}

fs::path synth_corpus(std::uint64_t seed, int n_slides, double class_balance, const fs::path& out_dir,
                      const SynthOptions& options) {
  if (n_slides < 2) throw Error(ErrorCode::InvalidArgument, "synth needs at least 2 slides");
  if (class_balance < 0.0 || class_balance > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "class balance must be in [0, 1]");
  }
  const int n_tumor = static_cast<int>(std::floor(n_slides * class_balance + 0.5));
  std::vector<Label> labels(static_cast<std::size_t>(n_slides), Label::Benign);
  for (int i = 0; i < n_tumor; ++i) labels[static_cast<std::size_t>(i)] = Label::Tumor;
  Rng rng(derive_seed(seed, {hash_string("labels")}));
  rng.shuffle(labels.begin(), labels.end());

  fs::create_directories(out_dir / "slides");
  std::vector<CorpusEntry> entries;
  for (int i = 0; i < n_slides; ++i) {
    const SynthSlide slide = synth_slide(seed, i, labels[static_cast<std::size_t>(i)], options);
    const PyramidImage pyramid = build_pyramid(slide.slide_id, slide.base, options.factors);
    const fs::path manifest = out_dir / "slides" / (slide.slide_id + ".json");
    save_pyramid(pyramid, manifest);
    entries.push_back({slide.slide_id, fs::path("slides") / (slide.slide_id + ".json"), slide.label});
  }
  const fs::path corpus = out_dir / "corpus.csv";
  write_corpus(corpus, entries);
  return corpus;
}

}  // namespace histo::cli
