#pragma once

#include <algorithm>
#include <future>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tgl/report.hpp"
#include "tgl/sparse_tensor.hpp"
#include "tgl/synthetic.hpp"
#include "tgl/trainer.hpp"

namespace tgl {

namespace detail {

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream tok(item);
    T v{};
    if (!(tok >> v) || !(tok >> std::ws).eof()) {
      throw InvalidArgument("bad element '" + item + "' in " + flag);
    }
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument(flag + " is empty");
  return out;
}

/// Unsigned list; rejects negative numbers that istream would silently wrap.
inline std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& flag) {
  for (const auto& v : parse_list<long long>(text, flag)) {
    if (v < 0) throw InvalidArgument(flag + " entries must be non-negative");
  }
  return parse_list<std::size_t>(text, flag);
}

}  // namespace detail

/// Experiment driver: load or generate a tensor, split it, train one model
/// per requested rank, write the report. Returns a process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Sparse tensor completion with CP decomposition and per-mode graph convolution"};
  app.option_defaults()->always_capture_default();

  std::string input;
  bool synthetic = false;
  std::string shape_text = "20,20,20";
  std::size_t true_rank = 3;
  double density = 0.1;
  double noise_std = 0.0;
  std::size_t clusters = 0;
  double cluster_spread = ClusterSpec{}.spread;
  std::string method = "cpd";
  std::optional<std::size_t> rank;
  std::string rank_sweep;
  TrainConfig defaults;
  std::size_t knn_k = defaults.knn_k;
  std::string layers;
  std::string activation = "relu";
  std::string final_activation = "identity";
  double lr = defaults.learning_rate;
  std::size_t epochs = defaults.max_epochs;
  std::size_t patience = defaults.patience;
  std::size_t rebuild_period = defaults.graph_rebuild_period;
  std::string split = "8,1,1";
  std::uint64_t seed = 0;
  bool weighted = false;
  std::string optimizer = "adam";
  bool deterministic = false;
  double init_scale = defaults.factor_init_scale;
  std::string output = "tgl_report.json";

  auto* in_opt = app.add_option("--input", input, "COO tensor file")->check(CLI::ExistingFile);
  auto* syn_opt = app.add_flag("--synthetic", synthetic, "Generate a low-rank tensor instead of reading one");
  in_opt->excludes(syn_opt);
  app.add_option("--shape", shape_text, "Synthetic mode sizes, comma separated");
  app.add_option("--true-rank", true_rank, "Synthetic ground-truth rank");
  app.add_option("--density", density, "Synthetic fraction of observed cells");
  app.add_option("--noise-std", noise_std, "Synthetic observation noise std");
  app.add_option("--clusters", clusters, "Synthetic factor rows drawn around this many centroids (0: plain normal)");
  app.add_option("--cluster-spread", cluster_spread, "Std of synthetic rows around their centroid");
  auto* method_opt = app.add_option("--method", method, "cpd or tgl")->check(CLI::IsMember({"cpd", "tgl"}));
  auto* rank_opt = app.add_option("--rank", rank, "Model rank");
  auto* sweep_opt = app.add_option("--rank-sweep", rank_sweep, "Comma-separated ranks, one run each");
  rank_opt->excludes(sweep_opt);
  auto* k_opt = app.add_option("--knn-k", knn_k, "Neighbors per node in the relation graphs");
  auto* layers_opt = app.add_option("--layers", layers, "GCN widths d0,d1,...,dL (d0 = dL = rank)");
  auto* act_opt = app.add_option("--activation", activation, "Hidden activation")
                      ->check(CLI::IsMember({"relu", "tanh", "identity"}));
  auto* final_opt = app.add_option("--final-activation", final_activation, "Last-layer activation")
                        ->check(CLI::IsMember({"relu", "tanh", "identity"}));
  auto* lr_opt = app.add_option("--lr", lr, "Learning rate");
  auto* epochs_opt = app.add_option("--epochs", epochs, "Maximum epochs");
  auto* patience_opt = app.add_option("--patience", patience, "Early-stopping patience in epochs");
  auto* rebuild_opt = app.add_option("--rebuild-period", rebuild_period, "Epochs between graph rebuilds");
  auto* split_opt = app.add_option("--split", split, "Train,validation,test ratios");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for data, split and initialization");
  auto* weighted_opt = app.add_flag("--weighted-edges", weighted, "Weight graph edges by cosine similarity");
  auto* opt_opt = app.add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  auto* scale_opt = app.add_option("--init-scale", init_scale, "Factor init range [-s, s]");
  app.add_flag("--deterministic", deterministic, "Run sweep entries sequentially");
  app.add_option("--output", output, "Report path");

  try {
    app.parse(argc, argv);
    if (input.empty() && !synthetic) throw CLI::RequiredError("--input or --synthetic");
    if (!rank && rank_sweep.empty()) throw CLI::RequiredError("--rank or --rank-sweep");
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    ReportDocument doc;
    std::optional<SparseTensor> tensor;
    if (synthetic) {
      const auto shape = detail::parse_sizes(shape_text, "--shape");
      SyntheticTensor gen = clusters > 0
          ? generate_clustered(shape, true_rank, {clusters, cluster_spread}, density, noise_std, seed)
          : generate_synthetic(shape, true_rank, density, noise_std, seed);
      tensor = std::move(gen.tensor);
      doc.dataset = {{"source", "synthetic"}, {"true_rank", true_rank}, {"density", density},
                     {"noise_std", noise_std}, {"clusters", clusters}};
      if (clusters > 0) doc.dataset["cluster_spread"] = cluster_spread;
    } else {
      tensor = read_coo_file(input);
      doc.dataset = {{"source", input}};
    }

    const auto ratios = detail::parse_list<double>(split, "--split");
    if (ratios.size() != 3) throw InvalidArgument("--split needs three ratios");
    const std::array<double, 3> ratio{ratios[0], ratios[1], ratios[2]};
    const auto parts = split_dataset(*tensor, ratio, seed);
    doc.dataset["shape"] = tensor->shape();
    doc.dataset["entries"] = tensor->nnz();
    doc.dataset["split_sizes"] = {parts.train.nnz(), parts.validation.nnz(), parts.test.nnz()};

    const std::vector<std::size_t> ranks =
        rank ? std::vector<std::size_t>{*rank} : detail::parse_sizes(rank_sweep, "--rank-sweep");

    std::vector<TrainConfig> configs;
    for (auto r : ranks) {
      TrainConfig c;
      c.method = *parse_method(method);
      c.rank = r;
      c.knn_k = knn_k;
      if (!layers.empty()) c.layer_dims = detail::parse_sizes(layers, "--layers");
      c.activation = *parse_activation(activation);
      c.final_activation = *parse_activation(final_activation);
      c.optimizer = *parse_optimizer(optimizer);
      c.learning_rate = lr;
      c.max_epochs = epochs;
      c.patience = patience;
      c.graph_rebuild_period = rebuild_period;
      c.seed = seed;
      c.split = ratio;
      c.weighted_edges = weighted;
      c.factor_init_scale = init_scale;
      c.validate();
      configs.push_back(std::move(c));
    }

    for (const auto* o : {method_opt, k_opt, layers_opt, act_opt, final_opt, lr_opt, epochs_opt,
                          patience_opt, rebuild_opt, split_opt, seed_opt, weighted_opt, opt_opt,
                          scale_opt}) {
      if (o->count() == 0) doc.defaulted_settings.push_back(o->get_name().substr(2));
    }

    if (deterministic || configs.size() == 1) {
      for (const auto& c : configs) doc.runs.push_back(fit(parts.train, parts.validation, parts.test, c));
    } else {
      std::vector<std::future<TrainReport>> pending;
      for (const auto& c : configs) {
        pending.push_back(std::async(std::launch::async, [&parts, c] {
          return fit(parts.train, parts.validation, parts.test, c);
        }));
      }
      for (auto& f : pending) doc.runs.push_back(f.get());
    }

    write_report(doc, output);
    for (const auto& r : doc.runs) {
      out << "method=" << to_string(r.config.method) << " rank=" << r.config.rank
          << " epochs=" << r.epochs.size() << " best_epoch=" << r.best_epoch
          << " stop=" << to_string(r.stop_reason) << " val_nre=" << std::setprecision(6)
          << r.best_validation_nre << " test_nre=" << r.test_nre << " report=" << output << '\n';
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tgl
