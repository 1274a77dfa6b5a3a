#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <specpoison/harness.hpp>
#include <specpoison/hyperopt.hpp>

using namespace specpoison;

namespace {

struct Common {
  std::string scenario_path;
  std::vector<std::string> overrides;
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1;
  std::string out;
  std::string format = "auto";
};

void add_common(CLI::App* cmd, Common& o) {
  cmd->add_option("--scenario", o.scenario_path, "Scenario JSON file (defaults built in when omitted)");
  cmd->add_option("--set", o.overrides, "Override a scenario field, e.g. --set arrival_rate=0.5");
  cmd->add_option("--seeds", o.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--first-seed", o.first_seed, "First seed of the range");
  cmd->add_option("--out", o.out, "Output file (stdout when omitted)");
  cmd->add_option("--format", o.format, "csv, json, or auto (from the --out extension)")
      ->check(CLI::IsMember({"auto", "csv", "json"}));
}

ScenarioConfig scenario(const Common& o) {
  ScenarioConfig c = o.scenario_path.empty() ? ScenarioConfig{} : load_scenario(o.scenario_path);
  for (const auto& s : o.overrides) c = apply_override(c, s);
  validate(c);
  return c;
}

ReportFormat format_of(const Common& o) {
  if (o.format == "json") return ReportFormat::json;
  if (o.format == "csv") return ReportFormat::csv;
  const auto dot = o.out.rfind('.');
  return dot != std::string::npos && o.out.substr(dot) == ".json" ? ReportFormat::json : ReportFormat::csv;
}

void emit_text(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write '" + out + "'");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + out + "'");
}

std::vector<AttackKind> attacks_from(const std::vector<std::string>& names) {
  std::vector<AttackKind> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.assign(std::begin(all_attack_kinds), std::end(all_attack_kinds));
      return out;
    }
    out.push_back(parse_attack_kind(n));
  }
  return out;
}

// SPECPOISON_LOG=quiet silences the per-cell summary on stderr.
bool quiet() {
  const char* v = std::getenv("SPECPOISON_LOG");
  return v && std::string(v) == "quiet";
}

void print_cells(const std::vector<CellSummary>& cells) {
  if (quiet()) return;
  auto p = [](const Stat& s) {
    char buf[16];
    if (!s.mean) return std::string("    n/a");
    std::snprintf(buf, sizeof buf, "%6.2f%%", 100.0 * *s.mean);
    return std::string(buf);
  };
  for (const auto& c : cells)
    std::fprintf(stderr, "%-18s P_d %.2f  M_Th %s  M_Sr %s  M_Tr %s\n", c.attack.c_str(), c.defense_level,
                 p(c.throughput).c_str(), p(c.success_ratio).c_str(), p(c.transmission_ratio).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrum-poisoning attack and defense simulator"};
  app.require_subcommand(1);

  Common sim;
  std::vector<std::string> sim_attacks{"none"};
  std::vector<double> sim_pd{0.0};
  auto* simulate = app.add_subcommand("simulate", "Run attack/defense cells over a seed range");
  add_common(simulate, sim);
  simulate->add_option("--attack", sim_attacks, "Attack kinds (none, evasion, jamming, causative, "
                                                "causative+evasion, causative+jamming, all)");
  simulate->add_option("--defense-pd", sim_pd, "Defense action ratios in [0,1]")->check(CLI::Range(0.0, 1.0));

  Common sw;
  std::string sweep_attack = "evasion";
  std::vector<double> grid{0.0, 0.1, 0.2, 0.4, 0.6, 0.8};
  auto* sweep = app.add_subcommand("sweep", "Sweep defense levels and pick the best one");
  add_common(sweep, sw);
  sweep->add_option("--attack", sweep_attack, "Attack the defense faces");
  sweep->add_option("--grid", grid, "Defense levels to evaluate")->check(CLI::Range(0.0, 1.0));

  Common tn;
  std::string method = "hyperband";
  auto* tune = app.add_subcommand("tune", "Search transmitter classifier hyperparameters");
  add_common(tune, tn);
  tune->add_option("--method", method, "hyperband or greedy")->check(CLI::IsMember({"hyperband", "greedy"}));

  std::string report_in, report_out, report_format = "csv";
  auto* report = app.add_subcommand("report", "Convert a JSON result file to CSV or JSON");
  report->add_option("--in", report_in, "JSON results written by simulate or sweep")->required();
  report->add_option("--out", report_out, "Output file (stdout when omitted)");
  report->add_option("--format", report_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      ExperimentSpec spec{scenario(sim), attacks_from(sim_attacks), sim_pd,
                          ExperimentSpec::seed_range(sim.first_seed, sim.seeds)};
      const auto r = run_experiment(spec);
      print_cells(r.cells);
      emit_text(emit_report(r.cells, format_of(sim)), sim.out);
    } else if (sweep->parsed()) {
      ExperimentSpec spec{scenario(sw), {parse_attack_kind(sweep_attack)}, grid,
                          ExperimentSpec::seed_range(sw.first_seed, sw.seeds)};
      const auto r = run_experiment(spec);
      print_cells(r.cells);
      const double best = search_defense_level(grid, sweep_evaluator(r, spec.attacks.front()));
      if (!quiet()) std::fprintf(stderr, "best defense level: %.2f\n", best);
      emit_text(emit_report(r.cells, format_of(sw)), sw.out);
    } else if (tune->parsed()) {
      nlohmann::json runs = nlohmann::json::array();
      for (std::uint64_t seed : ExperimentSpec::seed_range(tn.first_seed, tn.seeds)) {
        ScenarioConfig c = scenario(tn);
        c.seed = seed;
        const TransmitterStage st = run_transmitter_stage(c);
        TrainingEvaluator ev(st.train, st.validation, seed);
        const CandidateResult best = method == "greedy" ? sequential_fixing(SearchSpace{}, ev.as_evaluator())
                                                        : hyperband(SearchSpace{}, ev.as_evaluator(), seed);
        if (!quiet())
          std::fprintf(stderr, "seed %llu: validation error %.4f after %zu evaluations\n",
                     static_cast<unsigned long long>(seed), best.objective, best.evaluations);
        runs.push_back(nlohmann::json{{"seed", seed},
                        {"objective", best.objective},
                        {"evaluations", best.evaluations},
                        {"hyperparams", detail::hyperparams_json(best.hyperparams)}});
      }
      emit_text(runs.dump(2) + "\n", tn.out);
    } else if (report->parsed()) {
      std::ifstream in(report_in);
      if (!in) throw std::runtime_error("cannot open '" + report_in + "'");
      const auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw std::runtime_error("'" + report_in + "' is not valid JSON");
      const auto cells = cells_from_json(j);
      emit_text(emit_report(cells, report_format == "json" ? ReportFormat::json : ReportFormat::csv), report_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
