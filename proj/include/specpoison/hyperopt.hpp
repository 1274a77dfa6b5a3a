#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperparams.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "rng.hpp"

namespace specpoison {

/// Candidate values per hyperparameter. Hidden layers share the `neurons`
/// list; the greedy search keeps every layer the same width.
struct SearchSpace {
  std::vector<int> hidden_layers{1, 2, 3, 5, 10};
  std::vector<int> neurons{20, 50, 89, 100, 109, 119, 200};
  std::vector<int> batch_size{50, 100, 200};
  std::vector<int> training_steps{250, 500, 1000, 2000};
  std::vector<double> learning_rate{0.01, 0.05, 0.1};
  std::vector<double> decision_boundary{0.3, 0.4, 0.5, 0.6, 0.7};
  Hyperparams defaults;

  /// Every list nonempty and holding the corresponding default.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    auto check = [&](const auto& list, auto value, const char* name) {
      if (list.empty()) out.push_back(std::string(name) + " has no candidates");
      else if (std::find(list.begin(), list.end(), value) == list.end())
        out.push_back(std::string(name) + " does not contain its default");
    };
    check(hidden_layers, defaults.hidden_layers, "hidden_layers");
    check(neurons, defaults.neurons_per_layer.empty() ? 0 : defaults.neurons_per_layer.front(), "neurons");
    check(batch_size, defaults.batch_size, "batch_size");
    check(training_steps, defaults.training_steps, "training_steps");
    check(learning_rate, defaults.learning_rate, "learning_rate");
    check(decision_boundary, defaults.decision_boundary, "decision_boundary");
    for (const auto& v : hyperparam_violations(defaults)) out.push_back("defaults: " + v);
    return out;
  }

  void validate() const {
    const auto v = violations();
    if (!v.empty()) throw std::invalid_argument("invalid search space: " + v.front());
  }
};

/// e(C) = max(e_MD, e_FA) on a validation set holding both classes.
inline double objective(const Classifier& model, const Dataset& validation) {
  if (!validation.has_both_classes()) throw DatasetError("validation data must contain both classes");
  std::vector<int> predicted, truth;
  predicted.reserve(validation.size());
  truth.reserve(validation.size());
  for (const auto& s : validation.samples) {
    predicted.push_back(model.classify(s.features));
    truth.push_back(s.label);
  }
  return *evaluate(predicted, truth).e;
}

struct Evaluation {
  double objective = 1.0;
  std::optional<Classifier> model;
};

/// Trains (or looks up) a setting with `h.training_steps` as its budget.
using Evaluator = std::function<Evaluation(const Hyperparams&)>;

struct CandidateResult {
  Hyperparams hyperparams;
  double objective = 1.0;
  std::optional<Classifier> model;
  std::size_t evaluations = 0;
  long long budget_spent = 0;            // training steps requested across evaluations
  std::vector<std::size_t> pool_sizes;   // successive halving only
};

/// Evaluator over real training. Models are memoized per setting, and
/// trainers are resumed when only the step budget grows, so a budget or
/// boundary sweep costs no repeated work. Resuming k steps to k' equals
/// training k' steps from scratch.
class TrainingEvaluator {
 public:
  TrainingEvaluator(Dataset train, Dataset validation, std::uint64_t seed)
      : train_(std::move(train)), validation_(std::move(validation)), seed_(seed) {
    if (!validation_.has_both_classes()) throw DatasetError("validation data must contain both classes");
  }

  Evaluation operator()(const Hyperparams& h) {
    const std::string key = setting_key(h, true);
    if (auto it = results_.find(key); it != results_.end()) return it->second;
    auto& trainer = trainers_[setting_key(h, false)];
    if (!trainer || trainer->steps_done() > h.training_steps) trainer = std::make_unique<Trainer>(train_, h, seed_);
    trainer->run(h.training_steps - trainer->steps_done());
    Classifier model = trainer->model();
    model.decision_boundary = h.decision_boundary;
    Evaluation e{objective(model, validation_), std::move(model)};
    ++trainings_;
    results_.emplace(key, e);
    return e;
  }

  Evaluator as_evaluator() {
    return [this](const Hyperparams& h) { return (*this)(h); };
  }

  std::size_t distinct_evaluations() const { return trainings_; }

 private:
  static std::string setting_key(const Hyperparams& h, bool with_budget_and_boundary) {
    std::ostringstream os;
    os.precision(17);
    os << h.hidden_layers << '|';
    for (int n : h.neurons_per_layer) os << n << ',';
    os << '|' << h.batch_size << '|' << h.learning_rate;
    if (with_budget_and_boundary) os << '|' << h.training_steps << '|' << h.decision_boundary;
    return os.str();
  }

  Dataset train_, validation_;
  std::uint64_t seed_;
  std::map<std::string, std::unique_ptr<Trainer>> trainers_;
  std::map<std::string, Evaluation> results_;
  std::size_t trainings_ = 0;
};

/// Greedy coordinate search from the defaults: one pass over layers,
/// width, batch, steps, learning rate, boundary. Ties keep the incumbent.
inline CandidateResult sequential_fixing(const SearchSpace& space, const Evaluator& evaluate_setting) {
  space.validate();
  CandidateResult best;
  best.hyperparams = space.defaults;
  {
    Evaluation e = evaluate_setting(best.hyperparams);
    best.objective = e.objective;
    best.model = std::move(e.model);
    best.evaluations = 1;
    best.budget_spent = best.hyperparams.training_steps;
  }
  // Each coordinate is swept around the incumbent at the start of its sweep,
  // so that incumbent is the only setting of the sweep already evaluated.
  Hyperparams anchor;
  auto consider = [&](const Hyperparams& h) {
    if (h == anchor) return;
    Evaluation e = evaluate_setting(h);
    ++best.evaluations;
    best.budget_spent += h.training_steps;
    if (e.objective < best.objective) {
      best.hyperparams = h;
      best.objective = e.objective;
      best.model = std::move(e.model);
    }
  };
  auto sweep = [&](const auto& values, const auto& set) {
    anchor = best.hyperparams;
    for (const auto& v : values) {
      Hyperparams h = anchor;
      set(h, v);
      consider(h);
    }
  };
  sweep(space.hidden_layers, [&](Hyperparams& h, int layers) {
    const int width = h.neurons_per_layer.empty() ? space.neurons.front() : h.neurons_per_layer.front();
    h.hidden_layers = layers;
    h.neurons_per_layer.assign(static_cast<std::size_t>(layers), width);
  });
  sweep(space.neurons, [](Hyperparams& h, int width) {
    h.neurons_per_layer.assign(static_cast<std::size_t>(h.hidden_layers), width);
  });
  sweep(space.batch_size, [](Hyperparams& h, int b) { h.batch_size = b; });
  sweep(space.training_steps, [](Hyperparams& h, int steps) { h.training_steps = steps; });
  sweep(space.learning_rate, [](Hyperparams& h, double lr) { h.learning_rate = lr; });
  sweep(space.decision_boundary, [](Hyperparams& h, double tau) { h.decision_boundary = tau; });
  return best;
}

struct HalvingOptions {
  std::size_t initial_pool = 27;
  int eta = 3;
  int full_budget = 1000;        // training steps of the last survivor
  bool include_default = true;   // seed the pool with, and compare against, the defaults
};

/// Independent random setting: per-layer widths drawn separately.
inline Hyperparams sample_setting(const SearchSpace& space, int budget, RngStream& rng) {
  auto pick = [&](const auto& list) { return list[uniform_index(rng, list.size())]; };
  Hyperparams h;
  h.hidden_layers = pick(space.hidden_layers);
  h.neurons_per_layer.clear();
  for (int i = 0; i < h.hidden_layers; ++i) h.neurons_per_layer.push_back(pick(space.neurons));
  h.batch_size = pick(space.batch_size);
  h.learning_rate = pick(space.learning_rate);
  h.decision_boundary = pick(space.decision_boundary);
  h.training_steps = budget;
  return h;
}

/// Single successive-halving bracket: evaluate the pool at a small budget,
/// keep the best 1/eta, multiply the budget by eta, until one setting is
/// left at the full budget.
inline CandidateResult hyperband(const SearchSpace& space, const Evaluator& evaluate_setting, std::uint64_t seed,
                                 const HalvingOptions& opt = {}) {
  space.validate();
  if (opt.initial_pool < 1) throw std::invalid_argument("initial pool must hold at least one setting");
  if (opt.eta < 2) throw std::invalid_argument("eta must be >= 2");
  if (opt.full_budget < 1) throw std::invalid_argument("full budget must be >= 1");

  std::vector<std::size_t> sizes{opt.initial_pool};
  while (sizes.back() > 1)
    sizes.push_back((sizes.back() + static_cast<std::size_t>(opt.eta) - 1) / static_cast<std::size_t>(opt.eta));
  const int rounds = static_cast<int>(sizes.size());
  auto budget_of = [&](int round) {
    const double b = opt.full_budget / std::pow(static_cast<double>(opt.eta), rounds - 1 - round);
    return std::max(1, static_cast<int>(std::lround(b)));
  };

  RngStream rng = make_stream(seed, StreamTag::hyperopt);
  std::vector<Hyperparams> pool;
  if (opt.include_default) pool.push_back(space.defaults);
  while (pool.size() < opt.initial_pool) pool.push_back(sample_setting(space, opt.full_budget, rng));

  CandidateResult result;
  std::vector<Evaluation> scored;
  for (int round = 0; round < rounds; ++round) {
    result.pool_sizes.push_back(pool.size());
    const int budget = budget_of(round);
    scored.clear();
    for (auto& h : pool) {
      h.training_steps = budget;
      scored.push_back(evaluate_setting(h));
      ++result.evaluations;
      result.budget_spent += budget;
    }
    if (round + 1 == rounds) break;
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scored[a].objective < scored[b].objective; });
    std::vector<Hyperparams> next;
    for (std::size_t i = 0; i < sizes[static_cast<std::size_t>(round) + 1]; ++i) next.push_back(pool[order[i]]);
    pool = std::move(next);
  }
  result.hyperparams = pool.front();
  result.objective = scored.front().objective;
  result.model = std::move(scored.front().model);

  if (opt.include_default) {
    Hyperparams d = space.defaults;
    d.training_steps = opt.full_budget;
    if (!(d == result.hyperparams)) {
      Evaluation e = evaluate_setting(d);
      ++result.evaluations;
      result.budget_spent += d.training_steps;
      if (e.objective <= result.objective) {
        result.hyperparams = d;
        result.objective = e.objective;
        result.model = std::move(e.model);
      }
    }
  }
  return result;
}

}  // namespace specpoison
