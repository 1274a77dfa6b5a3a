#pragma once

#include <string>
#include <vector>

namespace specpoison {

/// Hyperparameters of a dense feedforward classifier. `neurons_per_layer`
/// holds one width per hidden layer.
struct Hyperparams {
  int hidden_layers = 3;
  std::vector<int> neurons_per_layer{100, 100, 100};
  int batch_size = 100;
  int training_steps = 1000;
  double learning_rate = 0.05;
  double decision_boundary = 0.5;

  bool operator==(const Hyperparams&) const = default;

  // Same width for every hidden layer.
  static Hyperparams uniform(int layers, int neurons) {
    Hyperparams h;
    h.hidden_layers = layers;
    h.neurons_per_layer.assign(static_cast<std::size_t>(layers), neurons);
    return h;
  }
};

/// Returns human-readable violations; empty when the hyperparameters are usable.
inline std::vector<std::string> hyperparam_violations(const Hyperparams& h) {
  std::vector<std::string> out;
  if (h.hidden_layers < 1) out.emplace_back("hidden_layers must be >= 1");
  if (static_cast<int>(h.neurons_per_layer.size()) != h.hidden_layers)
    out.emplace_back("neurons_per_layer length must equal hidden_layers");
  for (int n : h.neurons_per_layer)
    if (n < 1) {
      out.emplace_back("neurons_per_layer entries must be >= 1");
      break;
    }
  if (h.batch_size < 1) out.emplace_back("batch_size must be >= 1");
  if (h.training_steps < 0) out.emplace_back("training_steps must be >= 0");
  if (!(h.learning_rate > 0.0)) out.emplace_back("learning_rate must be > 0");
  if (!(h.decision_boundary > 0.0 && h.decision_boundary < 1.0))
    out.emplace_back("decision_boundary out of (0,1)");
  return out;
}

}  // namespace specpoison
