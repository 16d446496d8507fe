#include "histo/stain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "histo/error.hpp"
#include "histo/rng.hpp"

namespace histo {

namespace {

constexpr double kLog256 = 5.545177444479562;  // ln 256
constexpr int kMaxSweeps = 2000;
constexpr double kSweepTol = 1e-12;
constexpr int kInnerGradientSteps = 25;
constexpr int kMaxBacktracks = 12;
constexpr std::size_t kMinForeground = 100;

// Coordinate descent given G = W^T W and b = W^T od.
Eigen::Vector2d cd_solve(const Eigen::Matrix2d& G, const Eigen::Vector2d& b, double lambda, Eigen::Vector2d h) {
  const double half = 0.5 * lambda;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double change = 0.0;
    for (int j = 0; j < 2; ++j) {
      const int k = 1 - j;
      const double updated = G(j, j) > 0 ? std::max(0.0, (b(j) - G(j, k) * h(k) - half) / G(j, j)) : 0.0;
      change = std::max(change, std::abs(updated - h(j)));
      h(j) = updated;
    }
    if (change <= kSweepTol) break;
  }
  return h;
}

void solve_all(const Eigen::Matrix3Xd& V, const StainMatrix& W, double lambda, Eigen::Matrix2Xd& H) {
  const Eigen::Matrix2d G = W.transpose() * W;
  const Eigen::Matrix2Xd B = W.transpose() * V;
  for (Eigen::Index i = 0; i < V.cols(); ++i) H.col(i) = cd_solve(G, B.col(i), lambda, H.col(i));
}

void canonicalize(StainMatrix& W, Eigen::Matrix2Xd& H) {
  // Hematoxylin absorbs more in the blue channel than eosin.
  if (W(2, 0) < W(2, 1)) {
    W.col(0).swap(W.col(1));
    H.row(0).swap(H.row(1));
  }
}

// One projected gradient pass on ||V - W H||^2 with step `scale / L`,
// followed by unit-norm column renormalization. H rows absorb the column
// norms so W H is unchanged by the renormalization.
bool gradient_candidate(const StainMatrix& W, const Eigen::Matrix2Xd& H, const Eigen::Matrix2d& A,
                        const Eigen::Matrix<double, 3, 2>& B, double scale, StainMatrix& W_out,
                        Eigen::Matrix2Xd& H_out) {
  const double lipschitz = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(A).eigenvalues().maxCoeff();
  if (!(lipschitz > 0)) return false;
  StainMatrix next = W;
  for (int step = 0; step < kInnerGradientSteps; ++step) {
    const StainMatrix grad = 2.0 * (next * A - B);
    next = (next - (scale / lipschitz) * grad).cwiseMax(0.0);
    // Projection onto the nonnegative part of the unit ball.
    for (int j = 0; j < 2; ++j) {
      const double norm = next.col(j).norm();
      if (norm > 1.0) next.col(j) /= norm;
    }
  }
  H_out = H;
  for (int j = 0; j < 2; ++j) {
    const double norm = next.col(j).norm();
    if (!(norm > 1e-12)) return false;
    next.col(j) /= norm;
    H_out.row(j) *= norm;
  }
  W_out = next;
  return true;
}

}  // namespace

double byte_to_od(std::uint8_t intensity) { return -std::log((intensity + 1.0) / 256.0); }

std::uint8_t od_to_byte(double od) {
  const double v = std::round(256.0 * std::exp(-od) - 1.0);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

OdImage rgb_to_od(const RgbImage& raster) {
  std::array<double, 256> lut{};
  for (int i = 0; i < 256; ++i) lut[i] = byte_to_od(static_cast<std::uint8_t>(i));
  OdImage out{raster.width, raster.height, std::vector<double>(raster.data.size())};
  std::transform(raster.data.begin(), raster.data.end(), out.od.begin(), [&](std::uint8_t v) { return lut[v]; });
  return out;
}

RgbImage od_to_rgb(const OdImage& od) {
  RgbImage out(od.width, od.height);
  std::transform(od.od.begin(), od.od.end(), out.data.begin(), od_to_byte);
  return out;
}

StainMatrix reference_stain_matrix() {
  StainMatrix W;
  W << 0.65, 0.07,
       0.70, 0.99,
       0.29, 0.11;
  W.colwise().normalize();
  return W;
}

Eigen::Vector2d solve_concentration(const Eigen::Vector3d& od, const StainMatrix& W, double lambda,
                                    Eigen::Vector2d start) {
  return cd_solve(W.transpose() * W, W.transpose() * od, lambda, start);
}

double stain_objective(const Eigen::Matrix3Xd& V, const StainMatrix& W, const Eigen::Matrix2Xd& H, double lambda) {
  return (V - W * H).squaredNorm() + lambda * H.sum();
}

StainModel fit_stain_model(const Eigen::Matrix3Xd& V, const StainFitParams& params) {
  if (!(params.lambda > 0)) throw Error(ErrorCode::InvalidArgument, "stain lambda must be > 0");
  if (static_cast<std::size_t>(V.cols()) < kMinForeground) {
    throw Error(ErrorCode::InsufficientTissue,
                std::to_string(V.cols()) + " foreground pixels, need " + std::to_string(kMinForeground));
  }

  Rng rng(derive_seed(params.seed, {hash_string("stain-init")}));
  StainMatrix W = reference_stain_matrix();
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = std::max(0.0, W.data()[i] + rng.uniform(-0.02, 0.02));
  W.colwise().normalize();

  Eigen::Matrix2Xd H = Eigen::Matrix2Xd::Zero(2, V.cols());
  solve_all(V, W, params.lambda, H);

  StainModel model;
  model.meta.lambda = params.lambda;
  model.meta.pixels_used = static_cast<std::size_t>(V.cols());
  double objective = stain_objective(V, W, H, params.lambda);
  model.meta.objective_trace.push_back(objective);

  for (int iter = 0; iter < params.iters; ++iter) {
    // W-step, accepted only when it does not increase the objective.
    const Eigen::Matrix2d A = H * H.transpose();
    const Eigen::Matrix<double, 3, 2> B = V * H.transpose();
    double scale = 1.0;
    for (int attempt = 0; attempt < kMaxBacktracks; ++attempt, scale *= 0.5) {
      StainMatrix W_try;
      Eigen::Matrix2Xd H_try;
      if (!gradient_candidate(W, H, A, B, scale, W_try, H_try)) continue;
      const double f_try = stain_objective(V, W_try, H_try, params.lambda);
      if (f_try <= objective) {
        W = W_try;
        H = std::move(H_try);
        break;
      }
    }
    // H-step, kept only when it does not increase the objective.
    Eigen::Matrix2Xd H_prev = H;
    const double before_h = stain_objective(V, W, H, params.lambda);
    solve_all(V, W, params.lambda, H);
    double next = stain_objective(V, W, H, params.lambda);
    if (next > before_h) {
      H = std::move(H_prev);
      next = before_h;
    }
    model.meta.objective_trace.push_back(next);
    model.meta.iters_run = iter + 1;
    const double decrease = (objective - next) / std::max(objective, std::numeric_limits<double>::min());
    objective = next;
    if (decrease < params.tol) {
      model.meta.converged = true;
      break;
    }
  }

  canonicalize(W, H);
  model.W = W;
  for (int j = 0; j < 2; ++j) {
    std::vector<double> row(H.row(j).begin(), H.row(j).end());
    model.max_c(j) = percentile(row, 99.0);
  }
  return model;
}

StainModel fit_stain_model(const RgbImage& raster, const StainFitParams& params) {
  const OdImage od = rgb_to_od(raster);
  std::vector<Eigen::Index> foreground;
  const double threshold_sq = params.bg_od_threshold * params.bg_od_threshold;
  for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
    const double* p = od.od.data() + 3 * i;
    if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] >= threshold_sq) foreground.push_back(static_cast<Eigen::Index>(i));
  }
  if (foreground.size() < kMinForeground) {
    throw Error(ErrorCode::InsufficientTissue, std::to_string(foreground.size()) + " foreground pixels");
  }
  if (params.max_pixels > 0 && foreground.size() > params.max_pixels) {
    Rng rng(derive_seed(params.seed, {hash_string("stain-subsample")}));
    // Partial Fisher-Yates, then restore raster order.
    for (std::size_t i = 0; i < params.max_pixels; ++i) {
      const std::size_t j = i + rng.below(foreground.size() - i);
      std::swap(foreground[i], foreground[j]);
    }
    foreground.resize(params.max_pixels);
    std::sort(foreground.begin(), foreground.end());
  }
  Eigen::Matrix3Xd V(3, static_cast<Eigen::Index>(foreground.size()));
  for (std::size_t k = 0; k < foreground.size(); ++k) {
    const double* p = od.od.data() + 3 * foreground[k];
    V.col(static_cast<Eigen::Index>(k)) << p[0], p[1], p[2];
  }
  return fit_stain_model(V, params);
}

Eigen::Matrix2Xd concentrations(const RgbImage& raster, const StainMatrix& W, double lambda) {
  if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  const OdImage od = rgb_to_od(raster);
  const Eigen::Matrix2d G = W.transpose() * W;
  Eigen::Matrix2Xd H(2, static_cast<Eigen::Index>(raster.pixel_count()));
  for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
    const Eigen::Vector3d v(od.od[3 * i], od.od[3 * i + 1], od.od[3 * i + 2]);
    H.col(static_cast<Eigen::Index>(i)) = cd_solve(G, W.transpose() * v, lambda, Eigen::Vector2d::Zero());
  }
  return H;
}

RgbImage normalize_stain(const RgbImage& raster, const StainModel& source, const StainModel& target, double lambda) {
  constexpr double kEps = 1e-8;
  const Eigen::Matrix2Xd H = concentrations(raster, source.W, lambda);
  Eigen::Vector2d scale;
  for (int j = 0; j < 2; ++j) scale(j) = target.max_c(j) / std::max(source.max_c(j), kEps);
  OdImage out{raster.width, raster.height, std::vector<double>(raster.data.size())};
  for (Eigen::Index i = 0; i < H.cols(); ++i) {
    const Eigen::Vector3d od = target.W * H.col(i).cwiseProduct(scale);
    for (int c = 0; c < 3; ++c) out.od[3 * static_cast<std::size_t>(i) + c] = od(c);
  }
  return od_to_rgb(out);
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of empty list");
  if (p < 0 || p > 100) throw Error(ErrorCode::InvalidArgument, "percentile outside [0,100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double column_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

nlohmann::json to_json(const StainModel& model) {
  nlohmann::json doc;
  doc["W"] = std::vector<double>(model.W.data(), model.W.data() + 6);  // Eigen is column-major
  doc["max_c"] = {model.max_c(0), model.max_c(1)};
  doc["meta"] = {{"lambda", model.meta.lambda},
                 {"iters_run", model.meta.iters_run},
                 {"converged", model.meta.converged}};
  return doc;
}

StainModel stain_model_from_json(const nlohmann::json& doc) {
  StainModel m;
  try {
    const auto w = doc.at("W").get<std::vector<double>>();
    const auto c = doc.at("max_c").get<std::vector<double>>();
    if (w.size() != 6 || c.size() != 2) throw Error(ErrorCode::ParseError, "stain model has wrong shape");
    std::copy(w.begin(), w.end(), m.W.data());
    m.max_c << c[0], c[1];
    if (doc.contains("meta")) {
      const auto& meta = doc.at("meta");
      m.meta.lambda = meta.value("lambda", 0.0);
      m.meta.iters_run = meta.value("iters_run", 0);
      m.meta.converged = meta.value("converged", false);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("stain model: ") + e.what());
  }
  return m;
}

}  // namespace histo
