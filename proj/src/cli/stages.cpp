#include "histo/cli/stages.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "histo/cli/synth.hpp"
#include "histo/model.hpp"
#include "histo/png_io.hpp"
#include "histo/pyramid.hpp"
#include "histo/rng.hpp"
#include "histo/segment.hpp"
#include "histo/stain.hpp"
#include "histo/tile.hpp"

namespace histo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class F>
auto staged(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw StageError(stage, e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, ErrorCode::IoError, e.what());
  } catch (const json::exception& e) {
    throw StageError(stage, ErrorCode::ParseError, e.what());
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, path.string() + " not found; run the previous stage first");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_stage_stamp(const fs::path& dir, const std::string& stage, const PipelineConfig& cfg) {
  write_json(dir / "stage.json", {{"stage", stage}, {"config_hash", cfg.hash()}});
}

// One row of segment/slides.csv.
struct SlideRecord {
  std::string slide_id;
  std::string manifest;
  Label label = Label::Benign;
  int level = 0;
  int width = 0;
  int height = 0;
  int threshold = -1;
  long tissue_px = 0;
};

constexpr const char* kSlidesHeader = "slide_id,manifest,label,level,width,height,threshold,tissue_px";

void write_slides(const fs::path& path, const std::vector<SlideRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << kSlidesHeader << '\n';
  for (const auto& r : rows) {
    out << r.slide_id << ',' << r.manifest << ',' << to_string(r.label) << ',' << r.level << ',' << r.width << ','
        << r.height << ',' << r.threshold << ',' << r.tissue_px << '\n';
  }
}

std::vector<SlideRecord> read_slides(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, path.string() + " not found; run the segment stage first");
  std::string line;
  if (!std::getline(in, line) || line != kSlidesHeader) throw Error(ErrorCode::ParseError, path.string() + ": bad header");
  std::vector<SlideRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 8) throw Error(ErrorCode::ParseError, path.string() + ": bad row '" + line + "'");
    try {
      rows.push_back({f[0], f[1], parse_label(f[2]), std::stoi(f[3]), std::stoi(f[4]), std::stoi(f[5]), std::stoi(f[6]),
                      std::stol(f[7])});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, path.string() + ": bad number in '" + line + "'");
    }
  }
  return rows;
}

int working_level(const PipelineConfig& cfg, const PyramidImage& pyramid) {
  return cfg.level ? *cfg.level : default_working_level(pyramid);
}

RgbImage load_working_raster(const PipelineConfig& cfg, const fs::path& manifest, int* level_out = nullptr) {
  const PyramidImage pyramid = load_pyramid(manifest);
  const int level = working_level(cfg, pyramid);
  if (level_out) *level_out = level;
  return read_level(pyramid, level);
}

std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view what) {
  return derive_seed(cfg.seed, {hash_string(what)});
}

std::string patch_source_manifest(const PipelineConfig& cfg) {
  return cfg.stain_enabled ? "normalize/patches.csv" : "tiles/patches.csv";
}

std::string sha256_of_payload(const json& payload) { return sha256_hex(payload.dump()); }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Matrix select_rows(const Matrix& X, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

std::vector<int> select(const std::vector<int>& v, const std::vector<int>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
  return out;
}

// Training rows plus cfg.augment_copies augmented copies of each, appended
// after the originals.
void training_data(const PipelineConfig& cfg, const FeatureTable& table, const std::vector<int>& rows, Matrix& X,
                   std::vector<int>& y) {
  X = select_rows(table.values, rows);
  y = select(table.labels, rows);
  if (cfg.augment_copies == 0 || rows.empty()) return;
  const Eigen::Index n = X.rows();
  X.conservativeResize(n * (1 + cfg.augment_copies), Eigen::NoChange);
  Eigen::Index next = n;
  for (int r : rows) {
    const auto i = static_cast<std::size_t>(r);
    Patch p;
    p.slide_id = table.slide_ids[i];
    p.x = table.xs[i];
    p.y = table.ys[i];
    p.size_px = table.patch_size;
    p.pixels = features_to_image(std::span<const double>(table.values.row(r).data(), table.values.cols()), table.patch_size);
    for (int c = 0; c < cfg.augment_copies; ++c) {
      const Patch a = augment(p, cfg.augment, static_cast<std::uint64_t>(c));
      X.row(next++) = image_to_features(a.pixels).transpose();
      y.push_back(table.labels[i]);
    }
  }
}

void write_history(const fs::path& path, const Classifier& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "step,loss\n";
  const std::vector<double>* history = nullptr;
  if (const auto* m = std::get_if<MlpModel>(&model)) history = &m->loss_history;
  if (const auto* m = std::get_if<GbdtModel>(&model)) history = &m->loss_history;
  if (!history) return;
  char buf[64];
  for (std::size_t i = 0; i < history->size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, (*history)[i]);
    out << buf;
  }
}

}  // namespace

void write_features(const fs::path& dir, const FeatureTable& table, const std::string& config_hash) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "features.bin", std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write features.bin");
    const std::uint64_t header[2] = {static_cast<std::uint64_t>(table.values.rows()),
                                     static_cast<std::uint64_t>(table.values.cols())};
    out.write("HFEAT001", 8);
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    out.write(reinterpret_cast<const char*>(table.values.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(table.values.size())));
  }
  json rows = json::array();
  for (std::size_t i = 0; i < table.paths.size(); ++i) {
    rows.push_back({{"path", table.paths[i]},
                    {"slide_id", table.slide_ids[i]},
                    {"x", table.xs[i]},
                    {"y", table.ys[i]},
                    {"label", to_string(static_cast<Label>(table.labels[i]))}});
  }
  write_json(dir / "features.json", {{"n", table.values.rows()},
                                     {"d", table.values.cols()},
                                     {"patch_size", table.patch_size},
                                     {"layout", "row-major float64 after an 8-byte magic and two uint64 (n, d)"},
                                     {"rows", rows},
                                     {"config_hash", config_hash}});
}

FeatureTable read_features(const fs::path& dir) {
  const json meta = read_json(dir / "features.json");
  FeatureTable table;
  const auto n = meta.at("n").get<Eigen::Index>();
  const auto d = meta.at("d").get<Eigen::Index>();
  table.patch_size = meta.at("patch_size").get<int>();
  for (const auto& r : meta.at("rows")) {
    table.paths.push_back(r.at("path").get<std::string>());
    table.slide_ids.push_back(r.at("slide_id").get<std::string>());
    table.xs.push_back(r.at("x").get<int>());
    table.ys.push_back(r.at("y").get<int>());
    table.labels.push_back(static_cast<int>(parse_label(r.at("label").get<std::string>())));
  }
  std::ifstream in(dir / "features.bin", std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, (dir / "features.bin").string() + " not found");
  char magic[8];
  std::uint64_t header[2];
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || std::string_view(magic, 8) != "HFEAT001" || header[0] != static_cast<std::uint64_t>(n) ||
      header[1] != static_cast<std::uint64_t>(d) || table.paths.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::ParseError, "features.bin does not match features.json");
  }
  table.values.resize(n, d);
  in.read(reinterpret_cast<char*>(table.values.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n * d)));
  if (!in) throw Error(ErrorCode::ParseError, "features.bin is truncated");
  return table;
}

void run_segment(const PipelineConfig& cfg) {
  staged("segment", [&] {
    const auto corpus = read_corpus(cfg.corpus);
    const fs::path dir = cfg.out_dir / "segment";
    fs::create_directories(dir);
    std::vector<SlideRecord> records;
    for (const auto& entry : corpus) {
      int level = 0;
      const RgbImage raster = load_working_raster(cfg, entry.manifest, &level);
      SegmentParams params = cfg.segment;
      params.min_area_px = cfg.min_area_px.value_or(
          static_cast<long>(std::floor(cfg.min_area_frac * static_cast<double>(raster.pixel_count()) + 0.5)));
      SegmentResult result;
      try {
        result = build_mask(raster, params);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateHistogram) throw;
        spdlog::warn("slide {}: uniform raster, treating as no tissue", entry.slide_id);
        result.mask = BinaryMask(raster.width, raster.height);
        result.threshold = -1;
      }
      write_mask_png(dir / (entry.slide_id + "_mask.png"), result.mask);
      write_components_csv(dir / (entry.slide_id + "_components.csv"), result.components);
      records.push_back({entry.slide_id, fs::absolute(entry.manifest).lexically_normal().generic_string(), entry.label,
                         level, raster.width, raster.height, result.threshold, static_cast<long>(result.mask.count())});
    }
    write_slides(dir / "slides.csv", records);
    write_stage_stamp(dir, "segment", cfg);
    spdlog::info("segment: {} slides", records.size());
  });
}

void run_tile(const PipelineConfig& cfg) {
  staged("tile", [&] {
    const auto slides = read_slides(cfg.out_dir / "segment" / "slides.csv");
    const fs::path dir = cfg.out_dir / "tiles";
    fs::create_directories(dir / "patches");
    std::vector<DatasetRow> rows;
    for (const auto& s : slides) {
      const PyramidImage pyramid = load_pyramid(s.manifest);
      const RgbImage& raster = read_level(pyramid, s.level);
      const BinaryMask mask = read_mask_png(cfg.out_dir / "segment" / (s.slide_id + "_mask.png"));
      auto patches = extract_patches(raster, mask, cfg.tile_size, cfg.tile_stride, cfg.min_coverage);
      for (auto& p : patches) {
        p.slide_id = s.slide_id;
        p.label = s.label;
        const std::string name = patch_file_name(p);
        write_png(dir / "patches" / name, p.pixels);
        rows.push_back({"patches/" + name, p.slide_id, p.x, p.y, p.coverage, p.label});
      }
    }
    write_dataset_manifest(dir / "patches.csv", rows);
    write_stage_stamp(dir, "tile", cfg);
    spdlog::info("tile: {} patches from {} slides", rows.size(), slides.size());
  });
}

void run_normalize(const PipelineConfig& cfg) {
  staged("normalize", [&] {
    if (!cfg.stain_enabled) {
      spdlog::info("normalize: stain.enabled is false, nothing to do");
      return;
    }
    const auto slides = read_slides(cfg.out_dir / "segment" / "slides.csv");
    const auto tiles = read_dataset_manifest(cfg.out_dir / "tiles" / "patches.csv");
    const fs::path dir = cfg.out_dir / "normalize";
    fs::create_directories(dir / "patches");

    StainFitParams params = cfg.stain;
    RgbImage template_raster;
    std::string template_name;
    if (cfg.template_image) {
      template_name = cfg.template_image->filename().string();
      template_raster = cfg.template_image->extension() == ".json" ? load_working_raster(cfg, *cfg.template_image)
                                                                  : read_png(*cfg.template_image);
    } else {
      const SlideRecord* first = nullptr;
      for (const auto& s : slides) {
        if (s.label == Label::Benign) {
          first = &s;
          break;
        }
      }
      if (!first) throw Error(ErrorCode::InsufficientTissue, "no benign slide to use as stain template");
      spdlog::warn("normalize: no stain template configured, using benign slide {}", first->slide_id);
      template_name = first->slide_id;
      template_raster = read_level(load_pyramid(first->manifest), first->level);
    }
    params.seed = stage_seed(cfg, "stain-template");
    const StainModel target = fit_stain_model(template_raster, params);
    json target_doc = to_json(target);
    target_doc["template"] = template_name;
    target_doc["config_hash"] = cfg.hash();
    write_json(dir / "target_stain.json", target_doc);

    std::map<std::string, std::vector<const DatasetRow*>> by_slide;
    for (const auto& r : tiles) by_slide[r.slide_id].push_back(&r);

    std::vector<DatasetRow> rows;
    for (const auto& s : slides) {
      const auto it = by_slide.find(s.slide_id);
      if (it == by_slide.end()) continue;
      const RgbImage raster = read_level(load_pyramid(s.manifest), s.level);
      params.seed = derive_seed(cfg.seed, {hash_string("stain"), hash_string(s.slide_id)});
      const StainModel source = fit_stain_model(raster, params);
      json doc = to_json(source);
      doc["slide_id"] = s.slide_id;
      doc["config_hash"] = cfg.hash();
      write_json(dir / ("stain_" + s.slide_id + ".json"), doc);
      for (const DatasetRow* r : it->second) {
        const RgbImage patch = read_png(cfg.out_dir / "tiles" / r->patch_path);
        const RgbImage normalized = normalize_stain(patch, source, target, cfg.stain.lambda);
        const std::string name = fs::path(r->patch_path).filename().string();
        write_png(dir / "patches" / name, normalized);
        DatasetRow out = *r;
        out.patch_path = "patches/" + name;
        rows.push_back(std::move(out));
      }
    }
    write_dataset_manifest(dir / "patches.csv", rows);
    write_stage_stamp(dir, "normalize", cfg);
    spdlog::info("normalize: {} patches", rows.size());
  });
}

void run_featurize(const PipelineConfig& cfg) {
  staged("featurize", [&] {
    const std::string manifest = patch_source_manifest(cfg);
    const fs::path manifest_path = cfg.out_dir / manifest;
    const auto rows = read_dataset_manifest(manifest_path);
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, manifest + " lists no patches");
    FeatureTable table;
    table.patch_size = cfg.tile_size;
    const Eigen::Index d = 3 * static_cast<Eigen::Index>(cfg.tile_size) * cfg.tile_size;
    table.values.resize(static_cast<Eigen::Index>(rows.size()), d);
    const fs::path base = fs::path(manifest).parent_path();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const RgbImage img = read_png(manifest_path.parent_path() / rows[i].patch_path);
      if (img.width != cfg.tile_size || img.height != cfg.tile_size) {
        throw Error(ErrorCode::DimMismatch, rows[i].patch_path + " is not " + std::to_string(cfg.tile_size) + " px square");
      }
      table.values.row(static_cast<Eigen::Index>(i)) = image_to_features(img).transpose();
      table.paths.push_back((base / rows[i].patch_path).generic_string());
      table.slide_ids.push_back(rows[i].slide_id);
      table.xs.push_back(rows[i].x);
      table.ys.push_back(rows[i].y);
      table.labels.push_back(static_cast<int>(rows[i].label));
    }
    validate(FeatureMatrix{table.values, table.labels});
    write_features(cfg.out_dir / "features", table, cfg.hash());
    spdlog::info("featurize: {} x {}", table.values.rows(), table.values.cols());
  });
}

void run_train(const PipelineConfig& cfg) {
  staged("train", [&] {
    const FeatureTable table = read_features(cfg.out_dir / "features");
    const fs::path dir = cfg.out_dir / "train";
    fs::create_directories(dir);

    const SplitIndices split = stratified_split(table.labels, cfg.test_frac, stage_seed(cfg, "split"));
    write_json(dir / "split.json", {{"train", split.train}, {"test", split.test}, {"config_hash", cfg.hash()}});

    const Pipeline pipeline = Pipeline::make(cfg.pipeline_stages());
    json folds = json::array();
    if (cfg.k_folds >= 2) {
      const std::vector<int> y_train = select(table.labels, split.train);
      const auto cv = kfold(static_cast<int>(split.train.size()), cfg.k_folds, stage_seed(cfg, "cv"), &y_train);
      for (std::size_t f = 0; f < cv.size(); ++f) {
        std::vector<bool> held(split.train.size(), false);
        for (int i : cv[f]) held[static_cast<std::size_t>(i)] = true;
        std::vector<int> fit_rows, val_rows;
        for (std::size_t i = 0; i < split.train.size(); ++i) (held[i] ? val_rows : fit_rows).push_back(split.train[i]);
        Matrix X;
        std::vector<int> y;
        training_data(cfg, table, fit_rows, X, y);
        const FittedPipeline fitted = pipeline.fit(X, y);
        const Vector scores = fitted.predict_score(select_rows(table.values, val_rows));
        folds.push_back(to_json(compute_metrics(select(table.labels, val_rows), scores, cfg.threshold)));
      }
    }
    write_json(dir / "cv.json", {{"folds", folds}, {"config_hash", cfg.hash()}});

    Matrix X;
    std::vector<int> y;
    training_data(cfg, table, split.train, X, y);
    const FittedPipeline fitted = pipeline.fit(X, y);
    write_json(dir / "model.json", {{"model_id", cfg.model_id},
                                    {"threshold", cfg.threshold},
                                    {"pipeline", fitted.to_json()},
                                    {"config_hash", cfg.hash()}});
    write_history(dir / "history.csv", fitted.classifier());
    spdlog::info("train: {} rows ({} augmented), {} folds", X.rows(), X.rows() - static_cast<Eigen::Index>(split.train.size()),
                 folds.size());
  });
}

EvalReport run_evaluate(const PipelineConfig& cfg) {
  return staged("evaluate", [&] {
    const FeatureTable table = read_features(cfg.out_dir / "features");
    const json split = read_json(cfg.out_dir / "train" / "split.json");
    const json model = read_json(cfg.out_dir / "train" / "model.json");
    const json cv = read_json(cfg.out_dir / "train" / "cv.json");
    const FittedPipeline fitted = FittedPipeline::from_json(model.at("pipeline"));
    const auto test = split.at("test").get<std::vector<int>>();
    if (test.empty()) throw Error(ErrorCode::EmptyInput, "test split is empty; set eval.test_frac > 0");
    for (int i : test) {
      if (i < 0 || i >= table.values.rows()) throw Error(ErrorCode::LengthMismatch, "split does not match features");
    }
    const double threshold = model.at("threshold").get<double>();
    const std::vector<int> y_test = select(table.labels, test);
    const Vector scores = fitted.predict_score(select_rows(table.values, test));

    EvalReport report;
    report.test = compute_metrics(y_test, scores, threshold);
    if (report.test.auc) report.roc = roc_curve(y_test, scores);
    for (const auto& f : cv.at("folds")) report.per_fold.push_back(metric_set_from_json(f));
    report.model_id = model.at("model_id").get<std::string>();
    report.seed = cfg.seed;
    report.config_hash = cfg.hash();

    const fs::path dir = cfg.out_dir / "evaluate";
    fs::create_directories(dir);
    const json payload = to_json(report);
    write_json(dir / "report.json",
               {{"payload", payload}, {"payload_sha256", sha256_of_payload(payload)}, {"generated_at", utc_timestamp()}});
    write_roc_csv(dir / "roc.csv", report.roc);
    spdlog::info("evaluate: accuracy {}", report.test.accuracy ? std::to_string(*report.test.accuracy) : "null");
    return report;
  });
}

EvalReport run_pipeline(const PipelineConfig& cfg) {
  run_segment(cfg);
  run_tile(cfg);
  run_normalize(cfg);
  run_featurize(cfg);
  run_train(cfg);
  return run_evaluate(cfg);
}

json read_report_payload(const fs::path& out_dir) { return read_json(out_dir / "evaluate" / "report.json").at("payload"); }

}  // namespace histo::cli
