#include "histo/cli/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "histo/error.hpp"

namespace histo::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::ConfigInvalid, message); }

class Reader {
 public:
  explicit Reader(const ConfigValues& values) : values_(values) {}

  const std::string& str(const std::string& key) const { return values_.at(key); }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      invalid(key + ": expected a number, got '" + v + "'");
    }
  }

  long integer(const std::string& key) const {
    const std::string& v = str(key);
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) invalid(key + ": expected an integer, got '" + v + "'");
    return out;
  }

  bool boolean(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true") return true;
    if (v == "false") return false;
    invalid(key + ": expected true or false, got '" + v + "'");
  }

  bool is_auto(const std::string& key) const { return str(key) == "auto"; }

 private:
  const ConfigValues& values_;
};

void require(bool ok, const std::string& message) {
  if (!ok) invalid(message);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || v < 1) {
      invalid(key + ": expected a comma-separated list of positive integers");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"seed", "", "master seed (required)"},
      {"paths.corpus", "", "corpus manifest CSV (slide_id,manifest,label)"},
      {"paths.template", "", "stain template PNG or pyramid manifest; 'auto' = first benign slide"},
      {"paths.out", "out", "output directory"},
      {"segment.level", "auto", "pyramid level to process; auto = 2 or the coarsest"},
      {"segment.sigma", "2.0", "Gaussian sigma in pixels"},
      {"segment.min_area_px", "auto", "minimum component area; auto = min_area_frac of the level"},
      {"segment.min_area_frac", "0.005", "minimum component area as a fraction of level pixels"},
      {"segment.tissue_is_dark", "true", "tissue is darker than background"},
      {"tile.size", "256", "patch edge in pixels"},
      {"tile.stride", "256", "grid stride in pixels"},
      {"tile.min_coverage", "0.8", "minimum mask coverage per patch"},
      {"stain.enabled", "true", "run stain normalization"},
      {"stain.lambda", "0.1", "sparsity weight"},
      {"stain.iters", "200", "maximum alternating iterations"},
      {"stain.tol", "1e-6", "relative objective decrease to stop"},
      {"stain.bg_od_threshold", "0.15", "OD norm below which pixels are background"},
      {"stain.max_pixels", "50000", "foreground pixels sampled for fitting"},
      {"features.standardize", "true", "standardize features before the classifier"},
      {"features.pca", "false", "insert a PCA stage"},
      {"features.pca_k", "300", "PCA components (clamped to min(n-1, d))"},
      {"augment.copies", "0", "augmented copies per training patch"},
      {"augment.rot90", "true", "allow quarter-turn rotations"},
      {"augment.hflip", "true", "allow horizontal flips"},
      {"augment.vflip", "true", "allow vertical flips"},
      {"augment.max_shift", "0", "maximum shift in pixels"},
      {"model.kind", "svm", "mlp | forest | gbdt | svm"},
      {"model.kernel", "linear", "svm kernel: linear | rbf"},
      {"model.C", "1.0", "svm regularization"},
      {"model.gamma", "auto", "rbf gamma; auto = 1/d"},
      {"model.epochs", "auto", "svm/mlp epochs; auto = 20 (svm) or 100 (mlp)"},
      {"model.hidden", "64,32", "mlp hidden layer sizes"},
      {"model.lr", "auto", "learning rate; auto = 0.01 (mlp) or 0.3 (gbdt)"},
      {"model.batch", "32", "mlp batch size"},
      {"model.n_trees", "100", "forest size"},
      {"model.max_depth", "auto", "tree depth; auto = unlimited (forest) or 6 (gbdt)"},
      {"model.min_samples_split", "2", "forest minimum samples to split"},
      {"model.n_rounds", "100", "boosting rounds"},
      {"model.reg_lambda", "1.0", "boosting L2 leaf regularization"},
      {"eval.test_frac", "0.2", "held-out fraction"},
      {"eval.k_folds", "5", "cross-validation folds on the training split (0 = off)"},
      {"eval.threshold", "0.5", "decision threshold on scores"},
  };
  return keys;
}

ConfigValues parse_config_text(std::string_view text) {
  ConfigValues values;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    // Strip comments outside quotes.
    char quote = 0;
    std::string line;
    for (char c : raw) {
      if ((c == '"' || c == '\'') && (quote == 0 || quote == c)) quote = quote ? 0 : c;
      if (c == '#' && quote == 0) break;
      line.push_back(c);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') invalid("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) invalid("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) invalid("line " + std::to_string(line_no) + ": empty key");
    values[section.empty() ? key : section + "." + key] = value;
  }
  return values;
}

ConfigValues parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

PipelineConfig resolve_config(const ConfigValues& file_values, const ConfigValues& overrides,
                              const std::filesystem::path& base_dir) {
  std::set<std::string> known;
  for (const auto& k : config_keys()) known.insert(std::string(k.key));

  ConfigValues merged = file_values;
  for (const auto& [k, v] : overrides) merged[k] = v;
  for (const auto& [k, v] : merged) require(known.contains(k), "unknown config key '" + k + "'");
  for (const auto& k : config_keys()) {
    if (!merged.contains(std::string(k.key)) && !k.default_value.empty()) {
      merged[std::string(k.key)] = std::string(k.default_value);
    }
  }

  PipelineConfig c;
  require(merged.contains("seed"), "seed is required; there is no implicit randomness");
  require(merged.contains("paths.corpus"), "paths.corpus is required");
  const Reader r(merged);
  const long seed = r.integer("seed");
  require(seed >= 0, "seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);

  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  c.corpus = resolve(r.str("paths.corpus"));
  require(std::filesystem::exists(c.corpus), "corpus manifest does not exist: " + c.corpus.string());
  c.out_dir = resolve(r.str("paths.out"));

  c.level = r.is_auto("segment.level") ? std::nullopt : std::optional<int>(static_cast<int>(r.integer("segment.level")));
  c.segment.sigma = r.real("segment.sigma");
  require(c.segment.sigma >= 0, "segment.sigma must be >= 0");
  if (!r.is_auto("segment.min_area_px")) {
    c.min_area_px = r.integer("segment.min_area_px");
    require(*c.min_area_px >= 0, "segment.min_area_px must be >= 0");
  }
  c.min_area_frac = r.real("segment.min_area_frac");
  require(c.min_area_frac >= 0 && c.min_area_frac <= 1, "segment.min_area_frac must be in [0,1]");
  c.segment.tissue_is_dark = r.boolean("segment.tissue_is_dark");

  c.tile_size = static_cast<int>(r.integer("tile.size"));
  c.tile_stride = static_cast<int>(r.integer("tile.stride"));
  c.min_coverage = r.real("tile.min_coverage");
  require(c.tile_size >= 1 && c.tile_stride >= 1, "tile.size and tile.stride must be >= 1");
  require(c.min_coverage >= 0 && c.min_coverage <= 1, "tile.min_coverage must be in [0,1]");

  c.stain_enabled = r.boolean("stain.enabled");
  c.stain.lambda = r.real("stain.lambda");
  c.stain.iters = static_cast<int>(r.integer("stain.iters"));
  c.stain.tol = r.real("stain.tol");
  c.stain.bg_od_threshold = r.real("stain.bg_od_threshold");
  const long max_pixels = r.integer("stain.max_pixels");
  require(c.stain.lambda > 0, "stain.lambda must be > 0");
  require(c.stain.iters >= 0 && c.stain.tol >= 0 && max_pixels >= 0, "stain iteration settings must be >= 0");
  c.stain.max_pixels = static_cast<std::size_t>(max_pixels);
  c.stain.seed = c.seed;
  if (c.stain_enabled) {
    require(merged.contains("paths.template"),
            "paths.template is required when stain.enabled (use 'auto' for the first benign slide)");
    if (!r.is_auto("paths.template")) {
      c.template_image = resolve(r.str("paths.template"));
      require(std::filesystem::exists(*c.template_image), "template image does not exist: " + c.template_image->string());
    }
  }

  c.standardize = r.boolean("features.standardize");
  c.pca = r.boolean("features.pca");
  c.pca_k = static_cast<int>(r.integer("features.pca_k"));
  require(c.pca_k >= 1, "features.pca_k must be >= 1");

  c.augment_copies = static_cast<int>(r.integer("augment.copies"));
  require(c.augment_copies >= 0, "augment.copies must be >= 0");
  c.augment.allow_rot90 = r.boolean("augment.rot90");
  c.augment.allow_hflip = r.boolean("augment.hflip");
  c.augment.allow_vflip = r.boolean("augment.vflip");
  c.augment.max_shift_px = static_cast<int>(r.integer("augment.max_shift"));
  require(c.augment.max_shift_px >= 0 && c.augment.max_shift_px < c.tile_size,
          "augment.max_shift must be in [0, tile.size)");
  c.augment.seed = c.seed;

  const std::string kind = r.str("model.kind");
  auto& spec = c.classifier;
  if (kind == "mlp") {
    spec.kind = ClassifierKind::Mlp;
    spec.mlp.hidden = parse_int_list("model.hidden", r.str("model.hidden"));
    spec.mlp.epochs = r.is_auto("model.epochs") ? 100 : static_cast<int>(r.integer("model.epochs"));
    spec.mlp.lr = r.is_auto("model.lr") ? 0.01 : r.real("model.lr");
    spec.mlp.batch = static_cast<int>(r.integer("model.batch"));
    spec.mlp.seed = c.seed;
    require(spec.mlp.epochs >= 0 && spec.mlp.lr > 0 && spec.mlp.batch >= 1, "invalid mlp settings");
    c.model_id = "mlp";
  } else if (kind == "forest") {
    spec.kind = ClassifierKind::Forest;
    spec.forest.n_trees = static_cast<int>(r.integer("model.n_trees"));
    if (!r.is_auto("model.max_depth") && r.str("model.max_depth") != "none") {
      spec.forest.max_depth = static_cast<int>(r.integer("model.max_depth"));
    }
    spec.forest.min_samples_split = static_cast<int>(r.integer("model.min_samples_split"));
    spec.forest.seed = c.seed;
    require(spec.forest.n_trees >= 1 && spec.forest.min_samples_split >= 2, "invalid forest settings");
    c.model_id = "forest";
  } else if (kind == "gbdt") {
    spec.kind = ClassifierKind::Gbdt;
    spec.gbdt.n_rounds = static_cast<int>(r.integer("model.n_rounds"));
    spec.gbdt.max_depth = r.is_auto("model.max_depth") ? 6 : static_cast<int>(r.integer("model.max_depth"));
    spec.gbdt.lr = r.is_auto("model.lr") ? 0.3 : r.real("model.lr");
    spec.gbdt.reg_lambda = r.real("model.reg_lambda");
    spec.gbdt.seed = c.seed;
    require(spec.gbdt.n_rounds >= 0 && spec.gbdt.max_depth >= 0 && spec.gbdt.reg_lambda >= 0, "invalid gbdt settings");
    c.model_id = "gbdt";
  } else if (kind == "svm") {
    spec.kind = ClassifierKind::Svm;
    try {
      spec.svm.kernel = parse_kernel(r.str("model.kernel"));
    } catch (const Error&) {
      invalid("model.kernel must be linear or rbf");
    }
    spec.svm.C = r.real("model.C");
    spec.svm.gamma = r.is_auto("model.gamma") ? 0.0 : r.real("model.gamma");
    spec.svm.epochs = r.is_auto("model.epochs") ? 20 : static_cast<int>(r.integer("model.epochs"));
    spec.svm.seed = c.seed;
    require(spec.svm.C > 0 && spec.svm.epochs >= 1, "invalid svm settings");
    c.model_id = "svm-" + std::string(to_string(spec.svm.kernel));
  } else {
    invalid("model.kind must be one of mlp, forest, gbdt, svm");
  }
  if (c.pca) c.model_id = "pca+" + c.model_id;

  c.test_frac = r.real("eval.test_frac");
  c.k_folds = static_cast<int>(r.integer("eval.k_folds"));
  c.threshold = r.real("eval.threshold");
  require(c.test_frac >= 0 && c.test_frac < 1, "eval.test_frac must be in [0,1)");
  require(c.k_folds >= 0 && c.k_folds != 1, "eval.k_folds must be 0 or >= 2");

  c.effective = std::move(merged);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const ConfigValues& overrides) {
  return resolve_config(parse_config_file(path), overrides, path.parent_path());
}

std::string PipelineConfig::canonical_text() const {
  std::string text;
  for (const auto& [k, v] : effective) {
    if (k == "paths.out") continue;
    text += k + "=" + v + "\n";
  }
  return text;
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical_text()); }

std::vector<StageSpec> PipelineConfig::pipeline_stages() const {
  std::vector<StageSpec> stages;
  if (standardize) stages.emplace_back(ScalerStage{});
  if (pca) stages.emplace_back(PcaStage{pca_k});
  stages.emplace_back(classifier);
  return stages;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace histo::cli
