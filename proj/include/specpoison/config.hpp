#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hyperparams.hpp"

namespace specpoison {

struct Position {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Position&) const = default;
};

/// A radio node. Powers are linear and normalized to unit noise power.
struct NodeSpec {
  std::string id;
  Position position;
  double transmit_power = 0.0;
  bool operator==(const NodeSpec&) const = default;
};

/// Fractions of a slot spent sensing, sending data and returning feedback.
struct SlotStructure {
  double sensing_fraction = 0.1;
  double data_fraction = 0.9;
  double feedback_fraction = 0.0;
  bool operator==(const SlotStructure&) const = default;
};

// Fading variants. Every variant is parameterized so the mean power gain of
// a link equals its path-loss mean.
struct GaussianFading {
  double relative_std = 0.2;
  bool operator==(const GaussianFading&) const = default;
};
struct RayleighFading {
  bool operator==(const RayleighFading&) const = default;
};
struct RicianFading {
  double k_factor = 3.0;
  bool operator==(const RicianFading&) const = default;
};
struct LogNormalFading {
  double sigma_db = 3.0;
  bool operator==(const LogNormalFading&) const = default;
};

using ChannelModel = std::variant<GaussianFading, RayleighFading, RicianFading, LogNormalFading>;

inline std::string channel_model_name(const ChannelModel& m) {
  static constexpr const char* names[] = {"gaussian", "rayleigh", "rician", "lognormal"};
  return names[m.index()];
}

enum class AttackKind { none, evasion, jamming, causative, causative_evasion, causative_jamming };

inline constexpr AttackKind all_attack_kinds[] = {AttackKind::none,      AttackKind::evasion,
                                                   AttackKind::jamming,   AttackKind::causative,
                                                   AttackKind::causative_evasion,
                                                   AttackKind::causative_jamming};

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::evasion: return "evasion";
    case AttackKind::jamming: return "jamming";
    case AttackKind::causative: return "causative";
    case AttackKind::causative_evasion: return "causative+evasion";
    case AttackKind::causative_jamming: return "causative+jamming";
  }
  return "none";
}

inline AttackKind parse_attack_kind(const std::string& s) {
  for (AttackKind k : all_attack_kinds)
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown attack kind '" + s + "'");
}

inline bool has_causative(AttackKind k) {
  return k == AttackKind::causative || k == AttackKind::causative_evasion ||
         k == AttackKind::causative_jamming;
}
inline bool has_evasion(AttackKind k) {
  return k == AttackKind::evasion || k == AttackKind::causative_evasion;
}
inline bool has_jamming(AttackKind k) {
  return k == AttackKind::jamming || k == AttackKind::causative_jamming;
}

/// Unit in which sensed powers are handed to the classifiers.
enum class SensingScale { linear, decibel };

inline std::string to_string(SensingScale s) { return s == SensingScale::linear ? "linear" : "db"; }

inline SensingScale parse_sensing_scale(const std::string& s) {
  if (s == "linear") return SensingScale::linear;
  if (s == "db") return SensingScale::decibel;
  throw std::invalid_argument("unknown sensing scale '" + s + "' (expected linear or db)");
}

/// Score-gated defense. Thresholds are fitted later from reference scores.
struct DefenseConfig {
  double max_action_ratio = 0.0;  // P_d
  double flip_probability = 0.5;
  bool operator==(const DefenseConfig&) const = default;
};

/// Periodic retraining of the transmitter and the adversary's detection knobs.
struct RetrainConfig {
  int period = 2000;
  int collection_slots = 500;
  int change_window = 50;
  double change_threshold = 0.1;
  bool operator==(const RetrainConfig&) const = default;
};

struct ScenarioConfig {
  NodeSpec transmitter{"T", {0.0, 0.0}, 1000.0};
  NodeSpec receiver{"R", {10.0, 0.0}, 0.0};
  NodeSpec adversary{"A", {10.0, 10.0}, 1000.0};
  std::vector<NodeSpec> background{{"B", {0.0, 10.0}, 1000.0}};
  double noise_power = 1.0;
  double noise_relative_std = 0.2;
  double sinr_threshold = 3.0;
  ChannelModel channel_model = GaussianFading{};
  double arrival_rate = 0.8;
  double activation_probability = 0.2;
  int n_new = 10;
  SensingScale sensing_scale = SensingScale::decibel;
  SlotStructure slot_structure;
  int num_train_slots = 500;
  int num_test_slots = 500;
  int traffic_burn_in = 200;
  std::uint64_t seed = 1;
  Hyperparams hyperparams;
  std::optional<DefenseConfig> defense;
  std::optional<AttackKind> attack;
  RetrainConfig retrain;

  bool operator==(const ScenarioConfig&) const = default;
};

struct ConfigIssue {
  std::string path;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(render(issues)), issues_(std::move(issues)) {}

  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string render(const std::vector<ConfigIssue>& issues) {
    std::ostringstream os;
    os << "invalid scenario:";
    for (const auto& i : issues) os << "\n  " << i.path << ": " << i.message;
    return os.str();
  }
  std::vector<ConfigIssue> issues_;
};

inline bool finite(Position p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Euclidean distance. Throws std::domain_error for co-located points, where
/// inverse-square path loss is undefined.
inline double distance(Position a, Position b) {
  if (!finite(a) || !finite(b)) throw std::domain_error("non-finite position");
  const double d = std::hypot(a.x - b.x, a.y - b.y);
  if (!(d > 0.0)) throw std::domain_error("zero distance between distinct nodes");
  return d;
}

namespace detail {

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

inline void check_node(const NodeSpec& n, const std::string& path, std::vector<ConfigIssue>& out) {
  if (!finite(n.position)) out.push_back({path + ".position", "position must be finite"});
  if (!(n.transmit_power >= 0.0)) out.push_back({path + ".transmit_power", "transmit_power must be >= 0"});
}

}  // namespace detail

/// Every violated constraint of `c`; empty iff the scenario is valid.
inline std::vector<ConfigIssue> config_issues(const ScenarioConfig& c) {
  std::vector<ConfigIssue> out;
  detail::check_node(c.transmitter, "transmitter", out);
  detail::check_node(c.receiver, "receiver", out);
  detail::check_node(c.adversary, "adversary", out);
  if (c.background.empty()) out.push_back({"background", "at least one background source required"});
  for (std::size_t i = 0; i < c.background.size(); ++i)
    detail::check_node(c.background[i], "background." + std::to_string(i), out);

  auto co_located = [](const NodeSpec& a, const NodeSpec& b) {
    return finite(a.position) && finite(b.position) && a.position == b.position;
  };
  const NodeSpec* nodes[] = {&c.transmitter, &c.receiver, &c.adversary};
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (co_located(*nodes[i], *nodes[j]))
        out.push_back({nodes[i]->id + "/" + nodes[j]->id, "nodes are co-located"});
  for (std::size_t b = 0; b < c.background.size(); ++b)
    for (const NodeSpec* n : nodes)
      if (co_located(c.background[b], *n))
        out.push_back({"background." + std::to_string(b), "co-located with " + n->id});

  if (!(c.noise_power > 0.0)) out.push_back({"noise_power", "noise_power must be > 0"});
  if (!(c.noise_relative_std >= 0.0))
    out.push_back({"noise_relative_std", "noise_relative_std must be >= 0"});
  if (!(c.sinr_threshold > 0.0)) out.push_back({"sinr_threshold", "sinr_threshold must be > 0"});
  if (!(c.arrival_rate >= 0.0 && c.arrival_rate <= 1.0))
    out.push_back({"arrival_rate", "arrival_rate out of [0,1]"});
  if (!(c.activation_probability >= 0.0 && c.activation_probability <= 1.0))
    out.push_back({"activation_probability", "activation_probability out of [0,1]"});
  if (c.n_new < 1) out.push_back({"n_new", "n_new must be >= 1"});
  if (c.num_train_slots <= c.n_new)
    out.push_back({"num_train_slots", "num_train_slots must exceed n_new"});
  if (c.num_test_slots < 1) out.push_back({"num_test_slots", "num_test_slots must be >= 1"});
  if (c.traffic_burn_in < 0) out.push_back({"traffic_burn_in", "traffic_burn_in must be >= 0"});

  const auto& s = c.slot_structure;
  if (!(s.sensing_fraction >= 0.0) || !(s.data_fraction >= 0.0) || !(s.feedback_fraction >= 0.0))
    out.push_back({"slot_structure", "fractions must be >= 0"});
  const double sum = s.sensing_fraction + s.data_fraction + s.feedback_fraction;
  if (!(std::abs(sum - 1.0) <= 1e-12))
    out.push_back({"slot_structure", "fractions sum to " + detail::format_number(sum)});

  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, GaussianFading>) {
          if (!(m.relative_std >= 0.0))
            out.push_back({"channel_model.relative_std", "relative_std must be >= 0"});
        } else if constexpr (std::is_same_v<M, RicianFading>) {
          if (!(m.k_factor >= 0.0)) out.push_back({"channel_model.k_factor", "k_factor must be >= 0"});
        } else if constexpr (std::is_same_v<M, LogNormalFading>) {
          if (!(m.sigma_db >= 0.0)) out.push_back({"channel_model.sigma_db", "sigma_db must be >= 0"});
        }
      },
      c.channel_model);

  for (auto& v : hyperparam_violations(c.hyperparams)) out.push_back({"hyperparams", v});

  if (c.defense) {
    if (!(c.defense->max_action_ratio >= 0.0 && c.defense->max_action_ratio <= 1.0))
      out.push_back({"defense.max_action_ratio", "max_action_ratio out of [0,1]"});
    if (!(c.defense->flip_probability > 0.0 && c.defense->flip_probability <= 1.0))
      out.push_back({"defense.flip_probability", "flip_probability out of (0,1]"});
  }
  const auto& r = c.retrain;
  if (r.period < 1) out.push_back({"retrain.period", "period must be >= 1"});
  if (r.collection_slots <= c.n_new || r.collection_slots > r.period)
    out.push_back({"retrain.collection_slots", "collection_slots must be in (n_new, period]"});
  if (r.change_window < 1) out.push_back({"retrain.change_window", "change_window must be >= 1"});
  if (!(r.change_threshold > 0.0))
    out.push_back({"retrain.change_threshold", "change_threshold must be > 0"});
  return out;
}

/// Returns `c` unchanged when valid; throws ConfigError listing every issue otherwise.
inline const ScenarioConfig& validate(const ScenarioConfig& c) {
  auto issues = config_issues(c);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

// ---------------------------------------------------------------------------
// JSON mapping. Unknown keys are rejected so typos in scenario files surface.

namespace detail {

using nlohmann::json;

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(std::vector<ConfigIssue>{{path_.empty() ? "<root>" : path_, "expected an object"}});
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.emplace_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      it->get_to(out);
    } catch (const json::exception& e) {
      throw ConfigError(std::vector<ConfigIssue>{{where(key), std::string("bad value: ") + e.what()}});
    }
  }

  const json* child(const char* key) {
    seen_.emplace_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    std::vector<ConfigIssue> issues;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        issues.push_back({where(it.key()), "unknown key"});
    if (!issues.empty()) throw ConfigError(std::move(issues));
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline json position_json(Position p) { return json::array({p.x, p.y}); }

inline Position parse_position(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(std::vector<ConfigIssue>{{path, "position must be [x, y]"}});
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json node_json(const NodeSpec& n) {
  return {{"id", n.id}, {"position", position_json(n.position)}, {"transmit_power", n.transmit_power}};
}

inline NodeSpec parse_node(const json& j, const std::string& path, NodeSpec n) {
  ObjectReader r(j, path);
  r.get("id", n.id);
  if (const json* p = r.child("position")) n.position = parse_position(*p, r.where("position"));
  r.get("transmit_power", n.transmit_power);
  r.finish();
  return n;
}

inline json hyperparams_json(const Hyperparams& h) {
  return {{"hidden_layers", h.hidden_layers},   {"neurons_per_layer", h.neurons_per_layer},
          {"batch_size", h.batch_size},         {"training_steps", h.training_steps},
          {"learning_rate", h.learning_rate},   {"decision_boundary", h.decision_boundary}};
}

inline Hyperparams parse_hyperparams(const json& j, const std::string& path, Hyperparams h) {
  ObjectReader r(j, path);
  r.get("hidden_layers", h.hidden_layers);
  r.get("neurons_per_layer", h.neurons_per_layer);
  r.get("batch_size", h.batch_size);
  r.get("training_steps", h.training_steps);
  r.get("learning_rate", h.learning_rate);
  r.get("decision_boundary", h.decision_boundary);
  r.finish();
  return h;
}

inline json channel_json(const ChannelModel& m) {
  json j{{"kind", channel_model_name(m)}};
  if (auto* g = std::get_if<GaussianFading>(&m)) j["relative_std"] = g->relative_std;
  if (auto* r = std::get_if<RicianFading>(&m)) j["k_factor"] = r->k_factor;
  if (auto* l = std::get_if<LogNormalFading>(&m)) j["sigma_db"] = l->sigma_db;
  return j;
}

inline ChannelModel parse_channel(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  std::string kind = "gaussian";
  r.get("kind", kind);
  ChannelModel m;
  if (kind == "gaussian") {
    GaussianFading g;
    r.get("relative_std", g.relative_std);
    m = g;
  } else if (kind == "rayleigh") {
    m = RayleighFading{};
  } else if (kind == "rician") {
    RicianFading g;
    r.get("k_factor", g.k_factor);
    m = g;
  } else if (kind == "lognormal") {
    LogNormalFading g;
    r.get("sigma_db", g.sigma_db);
    m = g;
  } else {
    throw ConfigError(std::vector<ConfigIssue>{{r.where("kind"), "unknown channel model '" + kind + "'"}});
  }
  r.finish();
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const ScenarioConfig& c) {
  using nlohmann::json;
  json bg = json::array();
  for (const auto& b : c.background) bg.push_back(detail::node_json(b));
  const auto& s = c.slot_structure;
  json j{{"transmitter", detail::node_json(c.transmitter)},
         {"receiver", detail::node_json(c.receiver)},
         {"adversary", detail::node_json(c.adversary)},
         {"background", bg},
         {"noise_power", c.noise_power},
         {"noise_relative_std", c.noise_relative_std},
         {"sinr_threshold", c.sinr_threshold},
         {"channel_model", detail::channel_json(c.channel_model)},
         {"arrival_rate", c.arrival_rate},
         {"activation_probability", c.activation_probability},
         {"n_new", c.n_new},
         {"sensing_scale", to_string(c.sensing_scale)},
         {"slot_structure",
          {{"sensing_fraction", s.sensing_fraction},
           {"data_fraction", s.data_fraction},
           {"feedback_fraction", s.feedback_fraction}}},
         {"num_train_slots", c.num_train_slots},
         {"num_test_slots", c.num_test_slots},
         {"traffic_burn_in", c.traffic_burn_in},
         {"seed", c.seed},
         {"hyperparams", detail::hyperparams_json(c.hyperparams)},
         {"retrain",
          {{"period", c.retrain.period},
           {"collection_slots", c.retrain.collection_slots},
           {"change_window", c.retrain.change_window},
           {"change_threshold", c.retrain.change_threshold}}}};
  j["defense"] = c.defense ? json{{"max_action_ratio", c.defense->max_action_ratio},
                                  {"flip_probability", c.defense->flip_probability}}
                           : json(nullptr);
  j["attack"] = c.attack ? json(to_string(*c.attack)) : json(nullptr);
  return j;
}

/// Parses a scenario document; keys that are absent keep their defaults.
/// The result is validated; every range violation is reported at once.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  ScenarioConfig c;
  detail::ObjectReader r(j, "");
  if (const json* n = r.child("transmitter")) c.transmitter = detail::parse_node(*n, "transmitter", c.transmitter);
  if (const json* n = r.child("receiver")) c.receiver = detail::parse_node(*n, "receiver", c.receiver);
  if (const json* n = r.child("adversary")) c.adversary = detail::parse_node(*n, "adversary", c.adversary);
  if (const json* n = r.child("background")) {
    if (!n->is_array()) throw ConfigError(std::vector<ConfigIssue>{{"background", "expected an array"}});
    c.background.clear();
    for (std::size_t i = 0; i < n->size(); ++i)
      c.background.push_back(detail::parse_node((*n)[i], "background." + std::to_string(i),
                                                NodeSpec{"B" + std::to_string(i), {}, 1000.0}));
  }
  r.get("noise_power", c.noise_power);
  r.get("noise_relative_std", c.noise_relative_std);
  r.get("sinr_threshold", c.sinr_threshold);
  if (const json* m = r.child("channel_model")) c.channel_model = detail::parse_channel(*m, "channel_model");
  r.get("arrival_rate", c.arrival_rate);
  r.get("activation_probability", c.activation_probability);
  r.get("n_new", c.n_new);
  if (const json* sc = r.child("sensing_scale")) {
    if (!sc->is_string()) throw ConfigError(std::vector<ConfigIssue>{{"sensing_scale", "expected a string"}});
    try {
      c.sensing_scale = parse_sensing_scale(sc->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::vector<ConfigIssue>{{"sensing_scale", e.what()}});
    }
  }
  if (const json* s = r.child("slot_structure")) {
    detail::ObjectReader sr(*s, "slot_structure");
    sr.get("sensing_fraction", c.slot_structure.sensing_fraction);
    sr.get("data_fraction", c.slot_structure.data_fraction);
    sr.get("feedback_fraction", c.slot_structure.feedback_fraction);
    sr.finish();
  }
  r.get("num_train_slots", c.num_train_slots);
  r.get("num_test_slots", c.num_test_slots);
  r.get("traffic_burn_in", c.traffic_burn_in);
  r.get("seed", c.seed);
  if (const json* h = r.child("hyperparams")) c.hyperparams = detail::parse_hyperparams(*h, "hyperparams", c.hyperparams);
  if (const json* d = r.child("defense"); d && !d->is_null()) {
    DefenseConfig dc;
    detail::ObjectReader dr(*d, "defense");
    dr.get("max_action_ratio", dc.max_action_ratio);
    dr.get("flip_probability", dc.flip_probability);
    dr.finish();
    c.defense = dc;
  }
  if (const json* a = r.child("attack"); a && !a->is_null()) {
    if (!a->is_string()) throw ConfigError(std::vector<ConfigIssue>{{"attack", "expected a string"}});
    try {
      c.attack = parse_attack_kind(a->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::vector<ConfigIssue>{{"attack", e.what()}});
    }
  }
  if (const json* rt = r.child("retrain")) {
    detail::ObjectReader rr(*rt, "retrain");
    rr.get("period", c.retrain.period);
    rr.get("collection_slots", c.retrain.collection_slots);
    rr.get("change_window", c.retrain.change_window);
    rr.get("change_threshold", c.retrain.change_threshold);
    rr.finish();
  }
  r.finish();
  validate(c);
  return c;
}

/// Applies a `dotted.key=value` override (`background.0.position=[0,20]`).
/// The value is read as JSON when it parses, otherwise as a bare string.
inline ScenarioConfig apply_override(const ScenarioConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(std::vector<ConfigIssue>{{assignment, "override must look like key=value"}});
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  std::string pointer;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) pointer += "/" + part;
  nlohmann::json doc = to_json(c);
  nlohmann::json::json_pointer ptr(pointer);
  if (!doc.contains(ptr.parent_pointer()))
    throw ConfigError(std::vector<ConfigIssue>{{key, "unknown key"}});
  doc[ptr] = value;
  return scenario_from_json(doc);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::vector<ConfigIssue>{{path, "cannot open scenario file"}});
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(std::vector<ConfigIssue>{{path, "scenario file is not valid JSON"}});
  return scenario_from_json(j);
}

}  // namespace specpoison
