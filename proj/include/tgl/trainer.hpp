#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tgl/cp_model.hpp"
#include "tgl/error.hpp"
#include "tgl/gcn.hpp"
#include "tgl/metrics.hpp"
#include "tgl/optimizer.hpp"
#include "tgl/relation_graph.hpp"
#include "tgl/sparse_tensor.hpp"

namespace tgl {

enum class Method { cpd, tgl };

inline std::string_view to_string(Method m) { return m == Method::cpd ? "cpd" : "tgl"; }

inline std::optional<Method> parse_method(std::string_view name) {
  if (name == "cpd") return Method::cpd;
  if (name == "tgl") return Method::tgl;
  return std::nullopt;
}

struct TrainConfig {
  Method method = Method::cpd;
  std::size_t rank = 0;
  std::size_t knn_k = kDefaultKnnK;
  /// Empty means [rank, 2 * rank, rank].
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::relu;
  Activation final_activation = Activation::identity;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-2;
  std::size_t max_epochs = 2000;
  std::size_t patience = 200;
  std::size_t graph_rebuild_period = 1;
  std::uint64_t seed = 0;
  std::array<double, 3> split{8, 1, 1};
  bool weighted_edges = false;
  double factor_init_scale = kDefaultInitScale;
  /// When false the GCN weights stay at their initial values and only the
  /// raw factors are optimized.
  bool train_gcn_weights = true;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  std::vector<std::size_t> resolved_layer_dims() const {
    if (!layer_dims.empty()) return layer_dims;
    return {rank, 2 * rank, rank};
  }

  void validate() const {
    if (rank == 0) throw InvalidArgument("rank must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
      throw InvalidArgument("learning rate must be > 0");
    }
    if (max_epochs == 0) throw InvalidArgument("max epochs must be >= 1");
    if (patience == 0) throw InvalidArgument("patience must be >= 1");
    if (graph_rebuild_period == 0) throw InvalidArgument("graph rebuild period must be >= 1");
    if (!(factor_init_scale > 0)) throw InvalidArgument("init scale must be > 0");
    if (method == Method::tgl) {
      if (knn_k == 0) throw InvalidArgument("knn k must be >= 1");
      const auto dims = resolved_layer_dims();
      if (dims.size() < 2) throw InvalidArgument("layer dims need at least two entries");
      if (dims.front() != rank || dims.back() != rank) {
        throw InvalidArgument("layer dims must start and end with the rank " + std::to_string(rank));
      }
    }
  }
};

/// Parameters plus what it takes to evaluate them.
struct ModelSnapshot {
  CpModel model;
  std::vector<GcnStack> stacks;                   // tgl only
  std::vector<NormalizedAdjacency> adjacencies;   // tgl only
};

struct TrainState {
  ModelSnapshot params;
  std::vector<Moments> factor_moments;
  std::vector<std::vector<Moments>> weight_moments;
  std::size_t optimizer_steps = 0;
  std::size_t epoch = 0;
  std::size_t graph_builds = 0;

  std::optional<ModelSnapshot> best;
  std::size_t best_epoch = 0;
  double best_validation_nre = std::numeric_limits<double>::infinity();
};

namespace detail {
inline std::uint64_t mode_seed(std::uint64_t seed, std::size_t mode) {
  // splitmix64 finalizer over (seed, mode)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (mode + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Fresh state: random factors, and for tgl one GCN stack per mode.
/// Graphs are not built yet.
inline TrainState make_state(std::span<const std::size_t> shape, const TrainConfig& config) {
  config.validate();
  TrainState state;
  state.params.model = init_factors(shape, config.rank, config.seed, config.factor_init_scale);
  for (const auto& f : state.params.model.factors) state.factor_moments.push_back(Moments::zeros_like(f));
  if (config.method == Method::tgl) {
    const auto dims = config.resolved_layer_dims();
    for (std::size_t n = 0; n < shape.size(); ++n) {
      state.params.stacks.push_back(init_stack(dims, config.activation,
                                               detail::mode_seed(config.seed, n),
                                               config.final_activation));
      std::vector<Moments> m;
      for (const auto& w : state.params.stacks.back().weights) m.push_back(Moments::zeros_like(w));
      state.weight_moments.push_back(std::move(m));
    }
  }
  return state;
}

/// Recomputes every mode's KNN graph and normalized adjacency from the
/// current raw factors.
inline void rebuild_graphs(TrainState& state, const TrainConfig& config) {
  if (config.method != Method::tgl) throw InvalidArgument("graphs exist only for method tgl");
  auto& p = state.params;
  p.adjacencies.clear();
  for (const auto& f : p.model.factors) {
    p.adjacencies.push_back(
        normalize_adjacency(build_knn_graph(cosine_similarity(f), config.knn_k, config.weighted_edges)));
  }
  ++state.graph_builds;
}

/// Factors that enter the reconstruction: raw for cpd, GCN-refined for tgl.
inline std::vector<FactorMatrix> effective_factors(const ModelSnapshot& params) {
  if (params.stacks.empty()) return params.model.factors;
  if (params.adjacencies.size() != params.stacks.size()) {
    throw InvalidArgument("graphs have not been built");
  }
  std::vector<FactorMatrix> out;
  for (std::size_t n = 0; n < params.stacks.size(); ++n) {
    out.push_back(gcn_forward(params.stacks[n], params.model.factors[n], params.adjacencies[n]).refined);
  }
  return out;
}

namespace detail {

inline void check_learning_rate(double lr) {
  if (!(lr >= 0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be finite and >= 0");
}

inline void check_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                          "; lower the learning rate");
  }
}

inline void apply_update(Matrix& param, const Matrix& grad, Moments& moments,
                         const TrainConfig& config, std::size_t step) {
  if (config.optimizer == OptimizerKind::adam) {
    adam_step(param, grad, moments, config.learning_rate, step);
  } else {
    sgd_step(param, grad, config.learning_rate);
  }
}

}  // namespace detail

/// One full-batch gradient step on the raw factors. Returns the loss
/// before the step.
inline double train_epoch_cpd(TrainState& state, const SparseTensor& train, const TrainConfig& config) {
  detail::check_learning_rate(config.learning_rate);
  auto& factors = state.params.model.factors;
  const double loss = loss_observed(factors, train);
  detail::check_loss(loss, state.epoch);
  const auto grads = grad_cpd(factors, train);
  ++state.optimizer_steps;
  for (std::size_t n = 0; n < factors.size(); ++n) {
    detail::apply_update(factors[n], grads[n], state.factor_moments[n], config, state.optimizer_steps);
  }
  ++state.epoch;
  return loss;
}

/// One full-batch step of the joint objective: refine every mode through
/// its GCN stack, score the refined factors on `train`, and backpropagate
/// into the GCN weights and the raw factors. Returns the loss before the
/// step. Graphs must already be built.
inline double train_epoch_tgl(TrainState& state, const SparseTensor& train, const TrainConfig& config) {
  detail::check_learning_rate(config.learning_rate);
  auto& p = state.params;
  const std::size_t modes = p.model.modes();
  if (p.stacks.size() != modes) throw InvalidArgument("state has no GCN stacks");
  if (p.adjacencies.size() != modes) throw InvalidArgument("graphs have not been built");

  std::vector<GcnOutput> forward;
  std::vector<FactorMatrix> refined;
  for (std::size_t n = 0; n < modes; ++n) {
    forward.push_back(gcn_forward(p.stacks[n], p.model.factors[n], p.adjacencies[n]));
    refined.push_back(forward.back().refined);
  }
  const double loss = loss_observed(refined, train);
  detail::check_loss(loss, state.epoch);
  const auto refined_grads = grad_cpd(refined, train);

  ++state.optimizer_steps;
  for (std::size_t n = 0; n < modes; ++n) {
    const auto g = gcn_backward(p.stacks[n], forward[n].tape, refined_grads[n]);
    detail::apply_update(p.model.factors[n], g.input, state.factor_moments[n], config,
                         state.optimizer_steps);
    if (!config.train_gcn_weights) continue;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      detail::apply_update(p.stacks[n].weights[l], g.weights[l], state.weight_moments[n][l], config,
                           state.optimizer_steps);
    }
  }
  ++state.epoch;
  return loss;
}

/// Patience counter over a metric where lower is better.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw InvalidArgument("patience must be >= 1");
  }

  /// Records the metric of `epoch`; true when it strictly improves on the best so far.
  bool observe(std::size_t epoch, double metric) {
    if (metric < best_) {
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const noexcept { return stale_ >= patience_; }
  double best() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
};

enum class StopReason { early_stop, max_epochs };

inline std::string_view to_string(StopReason r) {
  return r == StopReason::early_stop ? "early-stop" : "max-epochs";
}

inline std::optional<StopReason> parse_stop_reason(std::string_view s) {
  if (s == "early-stop") return StopReason::early_stop;
  if (s == "max-epochs") return StopReason::max_epochs;
  return std::nullopt;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;  // before the epoch's update
  double train_nre = 0;   // after the update
  double validation_nre = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_nre = 0;
  double test_nre = 0;
  StopReason stop_reason = StopReason::max_epochs;
  std::size_t graph_builds = 0;
  double wall_clock_seconds = 0;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Trains until `max_epochs` or until validation NRE has not improved for
/// `patience` epochs, then scores the best snapshot on `test`.
inline TrainReport fit(const SparseTensor& train, const SparseTensor& validation,
                       const SparseTensor& test, const TrainConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  if (validation.shape() != train.shape() || test.shape() != train.shape()) {
    throw ShapeError("train, validation and test shapes differ");
  }
  if (train.empty()) throw InvalidArgument("training set is empty");
  if (validation.empty()) throw InvalidArgument("early stopping needs a non-empty validation set");

  TrainState state = make_state(train.shape(), config);
  EarlyStopping stopper(config.patience);
  TrainReport report;
  report.config = config;
  report.config.layer_dims = config.resolved_layer_dims();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss = 0;
    if (config.method == Method::tgl) {
      if ((epoch - 1) % config.graph_rebuild_period == 0) rebuild_graphs(state, config);
      loss = train_epoch_tgl(state, train, config);
    } else {
      loss = train_epoch_cpd(state, train, config);
    }
    const auto factors = effective_factors(state.params);
    const double train_nre = nre(factors, train).nre;
    const double val_nre = nre(factors, validation).nre;
    if (!std::isfinite(train_nre) || !std::isfinite(val_nre)) {
      throw DivergenceError("non-finite NRE after epoch " + std::to_string(epoch));
    }
    report.epochs.push_back({epoch, loss, train_nre, val_nre});
    if (stopper.observe(epoch, val_nre)) {
      state.best = state.params;
      state.best_epoch = epoch;
      state.best_validation_nre = val_nre;
    }
    if (stopper.should_stop()) {
      report.stop_reason = StopReason::early_stop;
      break;
    }
  }

  report.best_epoch = state.best_epoch;
  report.best_validation_nre = state.best_validation_nre;
  report.test_nre = nre(effective_factors(*state.best), test).nre;
  report.graph_builds = state.graph_builds;
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace tgl
