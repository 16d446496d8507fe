#include "histo/model.hpp"

#include <spdlog/spdlog.h>

#include "histo/error.hpp"

namespace histo {

namespace {

constexpr int kModelFormatVersion = 1;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Vector predict_score(const Classifier& model, const Matrix& X) {
  return std::visit(Overloaded{
                        [&](const MlpModel& m) { return mlp_predict_proba(m, X); },
                        [&](const ForestModel& m) { return forest_predict_proba(m, X); },
                        [&](const GbdtModel& m) { return gbdt_predict_proba(m, X); },
                        [&](const SvmModel& m) { return svm_predict_proba(m, X); },
                    },
                    model);
}

std::vector<int> threshold_scores(const Vector& scores, double threshold) {
  std::vector<int> labels(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) labels[static_cast<std::size_t>(i)] = scores(i) >= threshold ? 1 : 0;
  return labels;
}

std::vector<int> predict(const Classifier& model, const Matrix& X, double threshold) {
  return threshold_scores(predict_score(model, X), threshold);
}

std::string classifier_kind(const Classifier& model) {
  return std::visit(Overloaded{
                        [](const MlpModel&) { return std::string("mlp"); },
                        [](const ForestModel&) { return std::string("forest"); },
                        [](const GbdtModel&) { return std::string("gbdt"); },
                        [](const SvmModel&) { return std::string("svm"); },
                    },
                    model);
}

nlohmann::json to_json(const Classifier& model) {
  nlohmann::json body = std::visit([](const auto& m) { return histo::to_json(m); }, model);
  return {{"version", kModelFormatVersion}, {"kind", classifier_kind(model)}, {"model", body}};
}

Classifier classifier_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported model version");
    }
    const auto kind = doc.at("kind").get<std::string>();
    const auto& body = doc.at("model");
    if (kind == "mlp") return mlp_from_json(body);
    if (kind == "forest") return forest_from_json(body);
    if (kind == "gbdt") return gbdt_from_json(body);
    if (kind == "svm") return svm_from_json(body);
    throw Error(ErrorCode::ParseError, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
}

Classifier train_classifier(const ClassifierSpec& spec, const Matrix& X, const std::vector<int>& y) {
  switch (spec.kind) {
    case ClassifierKind::Mlp: return train_mlp(X, y, spec.mlp);
    case ClassifierKind::Forest: return train_forest(X, y, spec.forest);
    case ClassifierKind::Gbdt: return train_gbdt(X, y, spec.gbdt);
    case ClassifierKind::Svm: return train_svm(X, y, spec.svm);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown classifier kind");
}

FittedPipeline::FittedPipeline(std::vector<FittedTransform> transforms, Classifier classifier)
    : transforms_(std::move(transforms)), classifier_(std::move(classifier)) {}

Matrix FittedPipeline::transform(const Matrix& X) const {
  Matrix out = X;
  for (const auto& t : transforms_) {
    out = std::visit(Overloaded{
                         [&](const Scaler& s) { return apply_scaler(out, s); },
                         [&](const PcaModel& p) { return histo::transform(p, out); },
                     },
                     t);
  }
  return out;
}

Vector FittedPipeline::predict_score(const Matrix& X) const { return histo::predict_score(classifier_, transform(X)); }

std::vector<int> FittedPipeline::predict(const Matrix& X, double threshold) const {
  return threshold_scores(predict_score(X), threshold);
}

nlohmann::json FittedPipeline::to_json() const {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& t : transforms_) {
    stages.push_back(std::visit(Overloaded{
                                    [](const Scaler& s) { return nlohmann::json{{"type", "scaler"}, {"scaler", histo::to_json(s)}}; },
                                    [](const PcaModel& p) { return nlohmann::json{{"type", "pca"}, {"pca", histo::to_json(p)}}; },
                                },
                                t));
  }
  stages.push_back({{"type", "classifier"}, {"classifier", histo::to_json(classifier_)}});
  return {{"version", kModelFormatVersion}, {"stages", stages}};
}

FittedPipeline FittedPipeline::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported pipeline version");
    }
    std::vector<FittedTransform> transforms;
    const auto& stages = doc.at("stages");
    if (stages.empty() || stages.back().at("type") != "classifier") {
      throw Error(ErrorCode::StageDimMismatch, "pipeline JSON must end with a classifier");
    }
    for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
      const auto type = stages[i].at("type").get<std::string>();
      if (type == "scaler") {
        transforms.emplace_back(scaler_from_json(stages[i].at("scaler")));
      } else if (type == "pca") {
        transforms.emplace_back(pca_from_json(stages[i].at("pca")));
      } else {
        throw Error(ErrorCode::StageDimMismatch, "unexpected stage '" + type + "'");
      }
    }
    return FittedPipeline(std::move(transforms), classifier_from_json(stages.back().at("classifier")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("pipeline JSON: ") + e.what());
  }
}

Pipeline Pipeline::make(std::vector<StageSpec> stages) {
  const auto classifiers = std::count_if(stages.begin(), stages.end(), [](const StageSpec& s) {
    return std::holds_alternative<ClassifierSpec>(s);
  });
  if (classifiers != 1 || !std::holds_alternative<ClassifierSpec>(stages.back())) {
    throw Error(ErrorCode::StageDimMismatch, "pipeline needs exactly one classifier as its last stage");
  }
  return Pipeline(std::move(stages));
}

FittedPipeline Pipeline::fit(const Matrix& X, const std::vector<int>& y) const {
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw Error(ErrorCode::LengthMismatch, "labels/rows differ");
  std::vector<FittedTransform> transforms;
  Matrix current = X;
  for (std::size_t i = 0; i + 1 < stages_.size(); ++i) {
    if (std::holds_alternative<ScalerStage>(stages_[i])) {
      Scaler s = fit_scaler(current);
      current = apply_scaler(current, s);
      transforms.emplace_back(std::move(s));
    } else {
      const int requested = std::get<PcaStage>(stages_[i]).k;
      const int limit = static_cast<int>(std::min<Eigen::Index>(current.rows() - 1, current.cols()));
      int k = requested;
      if (k > limit) {
        spdlog::warn("PCA k={} exceeds min(n-1, d)={}; clamping", requested, limit);
        k = limit;
      }
      PcaModel p = fit_pca(current, k);
      current = histo::transform(p, current);
      transforms.emplace_back(std::move(p));
    }
  }
  Classifier classifier = train_classifier(std::get<ClassifierSpec>(stages_.back()), current, y);
  return FittedPipeline(std::move(transforms), std::move(classifier));
}

}  // namespace histo
