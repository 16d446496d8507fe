#include "histo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "histo/error.hpp"
#include "histo/rng.hpp"

namespace histo {

SplitIndices stratified_split(const std::vector<int>& labels, double test_frac, std::uint64_t seed) {
  if (!(test_frac >= 0.0 && test_frac < 1.0)) throw Error(ErrorCode::InvalidArgument, "test_frac must be in [0,1)");
  std::map<int, std::vector<int>> by_class{{0, {}}, {1, {}}};
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  SplitIndices split;
  for (auto& [cls, members] : by_class) {
    if (members.empty()) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(cls) + " has no samples");
    Rng rng(derive_seed(seed, {hash_string("split"), static_cast<std::uint64_t>(cls)}));
    rng.shuffle(members.begin(), members.end());
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(members.size()) * test_frac + 0.5));
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::vector<int>> kfold(int n, int k, std::uint64_t seed, const std::vector<int>* stratify_labels) {
  if (k < 2 || k > n) {
    throw Error(ErrorCode::KOutOfRange, "k=" + std::to_string(k) + " outside [2, " + std::to_string(n) + "]");
  }
  if (stratify_labels && static_cast<int>(stratify_labels->size()) != n) {
    throw Error(ErrorCode::LengthMismatch, "stratify labels length differs from n");
  }
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[stratify_labels ? (*stratify_labels)[i] : 0].push_back(i);

  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  // Round-robin dealing that continues across classes keeps both the total
  // and the per-class fold sizes within one of each other.
  int next_fold = 0;
  for (auto& [cls, members] : groups) {
    Rng rng(derive_seed(seed, {hash_string("kfold"), static_cast<std::uint64_t>(cls)}));
    rng.shuffle(members.begin(), members.end());
    for (int idx : members) {
      folds[static_cast<std::size_t>(next_fold)].push_back(idx);
      next_fold = (next_fold + 1) % k;
    }
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) throw Error(ErrorCode::LengthMismatch, "y_true and y_pred lengths differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool truth = y_true[i] == 1;
    const bool pred = y_pred[i] == 1;
    if (truth && pred) ++cm.tp;
    else if (!truth && pred) ++cm.fp;
    else if (!truth && !pred) ++cm.tn;
    else ++cm.fn;
  }
  return cm;
}

namespace {

double ratio(long num, long den, const char* name) {
  if (den == 0) throw Error(ErrorCode::UndefinedMetric, std::string(name) + " has a zero denominator");
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double precision(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fp, "precision"); }
double recall(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn, "recall"); }
double accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total(), "accuracy"); }

double f1(const ConfusionMatrix& cm) {
  const double p = precision(cm);
  const double r = recall(cm);
  if (p + r == 0.0) throw Error(ErrorCode::UndefinedMetric, "f1 with precision + recall == 0");
  return 2.0 * p * r / (p + r);
}

std::optional<double> metric_or_null(double (*metric)(const ConfusionMatrix&), const ConfusionMatrix& cm) {
  try {
    return metric(cm);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedMetric) throw;
    return std::nullopt;
  }
}

RocCurve roc_curve(const std::vector<int>& y_true, const Vector& scores) {
  if (static_cast<Eigen::Index>(y_true.size()) != scores.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels and scores lengths differ");
  }
  RocCurve curve;
  for (int y : y_true) (y == 1 ? curve.positives : curve.negatives)++;
  if (curve.positives == 0 || curve.negatives == 0) {
    throw Error(ErrorCode::SingleClassInput, "ROC needs both classes");
  }
  std::vector<std::size_t> order(y_true.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });

  const double P = static_cast<double>(curve.positives);
  const double N = static_cast<double>(curve.negatives);
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity(), 0, 0});
  long tp = 0;
  long fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores(static_cast<Eigen::Index>(order[i]));
    while (i < order.size() && scores(static_cast<Eigen::Index>(order[i])) == s) {
      (y_true[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({fp / N, tp / P, s, tp, fp});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  if (curve.points.size() < 2) throw Error(ErrorCode::InvalidArgument, "ROC curve needs at least two points");
  if (curve.positives > 0 && curve.negatives > 0) {
    // Twice the area in units of 1/(P N), accumulated exactly in integers.
    long long twice = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      const auto& a = curve.points[i - 1];
      const auto& b = curve.points[i];
      twice += static_cast<long long>(b.fp - a.fp) * (b.tp + a.tp);
    }
    const long long denom = 2LL * curve.positives * curve.negatives;
    // Evaluate from whichever side of 1/2 the area is on so that
    // complementary curves give exactly complementary doubles.
    if (2 * twice >= denom) return static_cast<double>(twice) / static_cast<double>(denom);
    return 1.0 - static_cast<double>(denom - twice) / static_cast<double>(denom);
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (b.tpr + a.tpr) / 2.0;
  }
  return area;
}

MetricSet compute_metrics(const std::vector<int>& y_true, const Vector& scores, double threshold) {
  std::vector<int> pred(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) pred[i] = scores(static_cast<Eigen::Index>(i)) >= threshold ? 1 : 0;
  MetricSet m;
  m.confusion = confusion(y_true, pred);
  m.precision = metric_or_null(precision, m.confusion);
  m.recall = metric_or_null(recall, m.confusion);
  m.f1 = metric_or_null(f1, m.confusion);
  m.accuracy = metric_or_null(accuracy, m.confusion);
  const bool both = std::count(y_true.begin(), y_true.end(), 1) > 0 && std::count(y_true.begin(), y_true.end(), 0) > 0;
  if (both) m.auc = auc(roc_curve(y_true, scores));
  return m;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

}  // namespace

nlohmann::json to_json(const MetricSet& m) {
  return {{"confusion", {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}}},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)},
          {"accuracy", opt(m.accuracy)},
          {"auc", opt(m.auc)}};
}

MetricSet metric_set_from_json(const nlohmann::json& doc) {
  MetricSet m;
  const auto& c = doc.at("confusion");
  m.confusion = {c.at("tp").get<long>(), c.at("fp").get<long>(), c.at("tn").get<long>(), c.at("fn").get<long>()};
  m.precision = opt_from(doc.at("precision"));
  m.recall = opt_from(doc.at("recall"));
  m.f1 = opt_from(doc.at("f1"));
  m.accuracy = opt_from(doc.at("accuracy"));
  m.auc = opt_from(doc.at("auc"));
  return m;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : report.roc.points) {
    roc.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", std::isinf(p.threshold) ? nlohmann::json(nullptr) : nlohmann::json(p.threshold)}});
  }
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.per_fold) folds.push_back(to_json(f));
  nlohmann::json doc = to_json(report.test);
  doc["roc"] = roc;
  doc["per_fold"] = folds;
  doc["metadata"] = {{"model_id", report.model_id},
                     {"seed", report.seed},
                     {"config_hash", report.config_hash},
                     {"positive_class", "tumor"}};
  return doc;
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "threshold,fpr,tpr\n";
  char buf[128];
  for (const auto& p : curve.points) {
    if (std::isinf(p.threshold)) {
      std::snprintf(buf, sizeof buf, "inf,%.17g,%.17g\n", p.fpr, p.tpr);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    }
    out << buf;
  }
}

}  // namespace histo
