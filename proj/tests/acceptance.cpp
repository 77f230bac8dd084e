// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "test_util.hpp"
#include "tgl/tgl.hpp"

namespace {

using namespace tgl;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // 0: no limit
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

NormalizedAdjacency random_adjacency(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> k(1, std::max<std::size_t>(1, n - 1));
  const Matrix features = test::random_matrix(static_cast<Eigen::Index>(n), 3, rng);
  return normalize_adjacency(build_knn_graph(cosine_similarity(features), k(rng)));
}

Outcome gcn_gradients() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> nodes(2, 8), rank(1, 4), hidden(1, 8);
  double worst = 0;
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t n = nodes(rng), r = rank(rng);
    const auto adj = random_adjacency(n, rng);
    auto stack = init_stack(std::vector<std::size_t>{r, hidden(rng), r}, Activation::relu,
                            static_cast<std::uint64_t>(instance), Activation::identity);
    Matrix h = test::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r), rng);
    const Matrix c = test::random_matrix(h.rows(), h.cols(), rng);
    auto loss = [&] { return gcn_forward(stack, h, adj).refined.cwiseProduct(c).sum(); };
    const auto fwd = gcn_forward(stack, h, adj);
    const auto grads = gcn_backward(stack, fwd.tape, c);
    for (std::size_t l = 0; l < stack.depth(); ++l) {
      worst = std::max(worst, test::max_rel_error(grads.weights[l], test::numeric_gradient(stack.weights[l], loss)));
    }
    worst = std::max(worst, test::max_rel_error(grads.input, test::numeric_gradient(h, loss)));
  }
  return {worst < 1e-4, "max rel error " + fmt(worst) + " over 20 instances"};
}

Outcome cpd_gradients() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> modes(2, 4), size(2, 6), rank(1, 4);
  double worst = 0;
  for (int instance = 0; instance < 20; ++instance) {
    std::vector<std::size_t> shape(modes(rng));
    std::size_t volume = 1;
    for (auto& s : shape) volume *= (s = size(rng));
    const auto data = generate_synthetic(shape, 2, std::max(0.5, 1.0 / static_cast<double>(volume)), 0.1,
                                         static_cast<std::uint64_t>(instance))
                          .tensor;
    const std::size_t r = rank(rng);
    std::vector<FactorMatrix> factors;
    for (auto s : shape) factors.push_back(test::random_matrix(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r), rng));
    const auto grads = grad_cpd(factors, data);
    auto loss = [&] { return loss_observed(factors, data); };
    for (std::size_t n = 0; n < shape.size(); ++n) {
      worst = std::max(worst, test::max_rel_error(grads[n], test::numeric_gradient(factors[n], loss)));
    }
  }
  return {worst < 1e-4, "max rel error " + fmt(worst) + " over 20 instances"};
}

TrainReport recovery_run(Method method) {
  const auto g = generate_synthetic(std::vector<std::size_t>{8, 8, 8}, 2, 0.5, 0.0, 0);
  const auto s = split_dataset(g.tensor, {8, 1, 1}, 0);
  TrainConfig c;
  c.method = method;
  c.rank = 2;
  c.seed = 0;
  c.max_epochs = 2000;
  return fit(s.train, s.validation, s.test, c);
}

Outcome recovery_cpd() {
  const auto r = recovery_run(Method::cpd);
  return {r.test_nre < 0.05, "cpd test NRE " + fmt(r.test_nre) + " after " + std::to_string(r.epochs.size()) +
                                 " epochs (target < 0.05)"};
}

Outcome recovery_tgl() {
  const auto r = recovery_run(Method::tgl);
  return {r.test_nre < 0.10, "tgl test NRE " + fmt(r.test_nre) + " after " + std::to_string(r.epochs.size()) +
                                 " epochs (target < 0.10)"};
}

Outcome clustered_comparison() {
  const std::vector<std::size_t> shape{50, 50, 20};
  double cpd_sum = 0, tgl_sum = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = generate_clustered(shape, 4, ClusterSpec{4, 0.1}, 0.05, 0.1, seed);
    const auto s = split_dataset(g.tensor, {8, 1, 1}, seed);
    TrainConfig c;
    c.rank = 8;
    c.seed = seed;
    c.method = Method::cpd;
    const double cpd = fit(s.train, s.validation, s.test, c).test_nre;
    c.method = Method::tgl;
    const double tgl = fit(s.train, s.validation, s.test, c).test_nre;
    cpd_sum += cpd;
    tgl_sum += tgl;
    per_seed += " s" + std::to_string(seed) + "=" + fmt(cpd) + "/" + fmt(tgl);
  }
  const double improvement = (cpd_sum - tgl_sum) / 5;
  return {improvement >= 0, "mean cpd " + fmt(cpd_sum / 5) + " vs tgl " + fmt(tgl_sum / 5) +
                                ", improvement " + fmt(improvement) + " (cpd/tgl:" + per_seed + ")"};
}

Outcome equivalence() {
  const auto g = generate_synthetic(std::vector<std::size_t>{9, 7, 6}, 3, 0.4, 0.05, 31);
  TrainConfig tgl_config;
  tgl_config.method = Method::tgl;
  tgl_config.rank = 3;
  tgl_config.seed = 31;
  tgl_config.train_gcn_weights = false;
  TrainConfig cpd_config = tgl_config;
  cpd_config.method = Method::cpd;

  auto a = make_state(g.tensor.shape(), tgl_config);
  a.params.stacks.clear();
  a.weight_moments.clear();
  for (const auto& f : a.params.model.factors) {
    a.params.stacks.push_back(GcnStack::identity(static_cast<std::size_t>(f.cols())));
    a.params.adjacencies.push_back(NormalizedAdjacency::identity(static_cast<std::size_t>(f.rows())));
    a.weight_moments.push_back({Moments::zeros_like(a.params.stacks.back().weights[0])});
  }
  auto b = make_state(g.tensor.shape(), cpd_config);
  double worst = 0;
  for (int epoch = 0; epoch < 10; ++epoch) {
    train_epoch_tgl(a, g.tensor, tgl_config);
    train_epoch_cpd(b, g.tensor, cpd_config);
    for (std::size_t n = 0; n < 3; ++n) {
      worst = std::max(worst, (a.params.model.factors[n] - b.params.model.factors[n]).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-10, "max parameter gap " + fmt(worst) + " over 10 epochs"};
}

Outcome normalization() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> nodes(2, 50), rank(1, 5), k(1, 12);
  std::bernoulli_distribution weighted(0.5);
  double asym = 0, min_entry = 0, min_diag = 1, complete_gap = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = nodes(rng);
    const Matrix f = test::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rank(rng)), rng);
    const Matrix d = normalize_adjacency(build_knn_graph(cosine_similarity(f), k(rng), weighted(rng))).dense();
    asym = std::max(asym, (d - d.transpose()).cwiseAbs().maxCoeff());
    min_entry = std::min(min_entry, d.minCoeff());
    min_diag = std::min(min_diag, d.diagonal().minCoeff());

    const Matrix complete = normalize_adjacency(build_knn_graph(cosine_similarity(f), n - 1)).dense();
    complete_gap = std::max(complete_gap, (complete.array() - 1.0 / static_cast<double>(n)).abs().maxCoeff());
  }
  const bool ok = asym <= 1e-12 && min_entry >= 0 && min_diag > 0 && complete_gap <= 1e-12;
  return {ok, "asymmetry " + fmt(asym) + ", min entry " + fmt(min_entry) + ", min diagonal " + fmt(min_diag) +
                  ", complete-graph gap " + fmt(complete_gap)};
}

Outcome split_protocol() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> modes(2, 4), size(2, 9);
  std::uniform_real_distribution<double> ratio(0.05, 1.0), density(0.1, 1.0);
  int failures = 0;
  std::string first;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> shape;
    std::size_t volume = 1;
    do {
      shape.assign(modes(rng), 0);
      volume = 1;
      for (auto& s : shape) volume *= (s = size(rng));
    } while (volume < 3);
    const double dens = std::max(density(rng), 3.0 / static_cast<double>(volume));
    const auto t = generate_synthetic(shape, 2, std::min(dens, 1.0), 0.1, static_cast<std::uint64_t>(trial)).tensor;
    const std::array<double, 3> ratios{ratio(rng), ratio(rng), ratio(rng)};
    const std::uint64_t seed = rng();
    const auto s = split_dataset(t, ratios, seed);
    const auto again = split_dataset(t, ratios, seed);

    // Independent rounding rule: held-out parts get round(share * count).
    const double total = ratios[0] + ratios[1] + ratios[2];
    const auto count = static_cast<double>(t.nnz());
    const auto val = static_cast<std::size_t>(std::llround(ratios[1] / total * count));
    const auto tst = std::min(static_cast<std::size_t>(std::llround(ratios[2] / total * count)), t.nnz() - val);

    std::map<std::vector<std::size_t>, std::pair<double, int>> seen;
    bool disjoint = true;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      for (std::size_t e = 0; e < part->nnz(); ++e) {
        const auto idx = part->index(e);
        auto [it, inserted] = seen.try_emplace(std::vector<std::size_t>(idx.begin(), idx.end()), part->value(e), 1);
        if (!inserted) disjoint = false;
      }
    }
    bool exhaustive = seen.size() == t.nnz();
    for (std::size_t e = 0; exhaustive && e < t.nnz(); ++e) {
      const auto idx = t.index(e);
      const auto it = seen.find(std::vector<std::size_t>(idx.begin(), idx.end()));
      exhaustive = it != seen.end() && it->second.first == t.value(e);
    }
    const bool sized = s.validation.nnz() == val && s.test.nnz() == tst && s.train.nnz() == t.nnz() - val - tst;
    const bool deterministic = s.train.same_entries(again.train) && s.validation.same_entries(again.validation) &&
                               s.test.same_entries(again.test);
    if (!(disjoint && exhaustive && sized && deterministic)) {
      if (failures++ == 0) {
        first = "trial " + std::to_string(trial) + ": disjoint=" + std::to_string(disjoint) +
                " exhaustive=" + std::to_string(exhaustive) + " sized=" + std::to_string(sized) +
                " deterministic=" + std::to_string(deterministic);
      }
    }
  }
  return {failures == 0, failures == 0 ? "200 tensors ok" : std::to_string(failures) + " failures; " + first};
}

Outcome nre_identities() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> size(3, 10), rank(1, 4);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  double perfect = 0, zero_gap = 0, scale_gap = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<std::size_t> shape{size(rng), size(rng), size(rng)};
    const auto g = generate_synthetic(shape, rank(rng), 0.5, 0.0, static_cast<std::uint64_t>(trial));
    perfect = std::max(perfect, nre(g.truth.factors, g.tensor).nre);

    std::vector<FactorMatrix> zeros;
    for (const auto& f : g.truth.factors) zeros.push_back(Matrix::Zero(f.rows(), f.cols()));
    zero_gap = std::max(zero_gap, std::abs(nre(zeros, g.tensor).nre - 1.0));

    std::vector<FactorMatrix> guess;
    for (const auto& f : g.truth.factors) guess.push_back(test::random_matrix(f.rows(), f.cols(), rng));
    const double base = nre(guess, g.tensor).nre;
    const double c = scale(rng);
    std::vector<double> scaled_values(g.tensor.values().begin(), g.tensor.values().end());
    for (auto& v : scaled_values) v *= c;
    const SparseTensor scaled(g.tensor.shape(),
                              std::vector<std::size_t>(g.tensor.indices().begin(), g.tensor.indices().end()),
                              scaled_values);
    guess[0] *= c;
    scale_gap = std::max(scale_gap, std::abs(nre(guess, scaled).nre - base));
  }
  const bool ok = perfect <= 1e-12 && zero_gap <= 1e-12 && scale_gap <= 1e-12;
  return {ok, "perfect " + fmt(perfect) + ", |zero - 1| " + fmt(zero_gap) + ", scale gap " + fmt(scale_gap)};
}

std::string read_without_wall_clock(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    if (line.find("\"wall_clock_seconds\"") == std::string::npos) out += line + '\n';
  }
  return out;
}

Outcome cli_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "tgl_acceptance";
  std::filesystem::create_directories(dir);
  auto invoke = [&](const std::string& name) {
    const std::string cmd = std::string("\"") + TGL_CLI_PATH +
                            "\" --synthetic --shape 12,10,8 --true-rank 2 --density 0.3 --noise-std 0.05"
                            " --method tgl --rank-sweep 2,3 --knn-k 3 --epochs 150 --seed 9 --deterministic"
                            " --output \"" + (dir / name).string() + "\" > /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const int a = invoke("a.json"), b = invoke("b.json");
  if (a != 0 || b != 0) return {false, "cli exit codes " + std::to_string(a) + ", " + std::to_string(b)};
  const auto ta = read_without_wall_clock(dir / "a.json");
  const auto tb = read_without_wall_clock(dir / "b.json");
  std::filesystem::remove_all(dir);
  return {ta == tb && !ta.empty(), ta == tb ? "reports identical apart from wall clock" : "reports differ"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gradient-gcn", 10, gcn_gradients},
      {2, "gradient-cpd", 5, cpd_gradients},
      {3, "recovery-cpd", 60, recovery_cpd},
      {3, "recovery-tgl", 60, recovery_tgl},
      {4, "clustered-tgl-vs-cpd", 300, clustered_comparison},
      {5, "identity-equivalence", 0, equivalence},
      {6, "normalization-invariants", 0, normalization},
      {7, "split-protocol", 0, split_protocol},
      {8, "nre-identities", 0, nre_identities},
      {9, "cli-determinism", 0, cli_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0 && secs >= c.time_limit_s) {
      o.pass = false;
      o.detail += "; over time limit " + fmt(c.time_limit_s) + " s";
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu checks failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
