// Command-line harness: extract / simulate / omission / unsound-demo /
// antichain / report. Exit codes: 0 success, 1 validation or input error,
// 2 failed assertion in a demo subcommand.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cas/errors.hpp"
#include "cas/harness.hpp"
#include "cas/multiwoz.hpp"
#include "cas/parallel.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string corpus;
  std::string ontology;
  std::string hypergraph;
  std::string templates;
  std::string out;
  double theta = 0.75;
  std::size_t horizon = 3;
  double tau = 0.85;
  std::uint64_t seed = 1;
  std::vector<double> coverage;
  std::vector<std::string> methods;
  std::string cost_model;  // "rag,tier2,tier1"
  std::size_t synth_sessions = 0;
  std::string cas_scope;
  int threads = 0;
  bool traces = false;
  bool lenient = false;
};

cas::ExperimentConfig build_config(const CommonFlags& f, const CLI::App* cmd) {
  cas::ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = cas::config_from_json(f.config_path);
  auto given = [&](const std::string& name) { return cmd->count(name) > 0; };

  if (given("--corpus")) cfg.corpus_path = f.corpus;
  if (given("--ontology")) cfg.ontology_path = f.ontology;
  if (given("--hypergraph")) cfg.hypergraph_path = f.hypergraph;
  if (given("--templates")) cfg.templates_path = f.templates;
  if (given("--theta")) cfg.theta = f.theta;
  if (given("--horizon")) cfg.horizon = f.horizon;
  if (given("--tau")) cfg.tau = f.tau;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--coverage")) cfg.coverage_levels = f.coverage;
  if (given("--synth-sessions")) {
    cfg.use_synth = true;
    cfg.synth = cas::default_synth_params();
    cfg.synth.n_sessions = f.synth_sessions;
  }
  if (given("--method")) {
    cfg.methods.clear();
    for (const auto& m : f.methods) cfg.methods.push_back(cas::method_from_string(m));
  }
  if (given("--cas-scope")) {
    if (f.cas_scope == "run") cfg.cas_scope = cas::CasScope::Run;
    else if (f.cas_scope == "session") cfg.cas_scope = cas::CasScope::Session;
    else throw cas::InputError("--cas-scope must be run or session");
  }
  if (given("--cost-model")) {
    std::istringstream is(f.cost_model);
    char comma;
    if (!(is >> cfg.cost.rag_units >> comma >> cfg.cost.tier2_units >> comma >>
          cfg.cost.tier1_units))
      throw cas::InputError("--cost-model expects rag,tier2,tier1");
  }
  if (given("--traces")) cfg.emit_traces = true;
  if (given("--lenient-labels")) cfg.lenient_labels = true;
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "experiment config JSON");
  cmd->add_option("--corpus", f.corpus, "corpus file (native JSON) or dataset directory");
  cmd->add_option("--ontology", f.ontology, "ontology JSON");
  cmd->add_option("--hypergraph", f.hypergraph, "hypergraph JSON");
  cmd->add_option("--templates", f.templates, "template db JSON");
  cmd->add_option("--theta", f.theta, "extraction soundness threshold");
  cmd->add_option("--horizon", f.horizon, "derivation horizon in turns");
  cmd->add_option("--tau", f.tau, "cosine cache similarity threshold");
  cmd->add_option("--coverage", f.coverage, "template coverage levels")->delimiter(',');
  cmd->add_option("--seed", f.seed, "run seed (mandatory for stochastic runs)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--method", f.methods, "methods: no_cache,cosine,cas_only,cas_pab")
      ->delimiter(',');
  cmd->add_option("--cost-model", f.cost_model, "cost units as rag,tier2,tier1");
  cmd->add_option("--synth-sessions", f.synth_sessions,
                  "use the built-in synthetic world with this many sessions");
  cmd->add_option("--cas-scope", f.cas_scope, "run | session");
  cmd->add_option("--threads", f.threads, "worker threads (1 = serial reference)");
  cmd->add_flag("--traces", f.traces, "emit per-turn session traces");
  cmd->add_flag("--lenient-labels", f.lenient, "drop labels the graph cannot resolve");
}

void print_cells(const cas::Metrics& m) {
  std::printf("%-10s %8s %9s %8s %8s %8s %8s %10s %10s\n", "method", "cov", "mean_rag",
              "tier1", "tier2", "hit", "blocked", "unsafe", "cost");
  for (const auto& c : m.cells) {
    std::printf("%-10s %8.2f %9.3f %8.3f %8.3f %8.3f %8.3f %10llu %10.1f\n",
                std::string(cas::to_string(c.method)).c_str(), c.coverage, c.mean_rag,
                c.tier1_rate, c.tier2_rate, c.hit_rate, c.blocked_rate,
                static_cast<unsigned long long>(c.unsafe_hits), c.mean_cost);
  }
}

int cmd_extract(const CommonFlags& f, const CLI::App* cmd) {
  cas::ExperimentConfig cfg = build_config(f, cmd);
  cas::Corpus corpus;
  cas::Ontology ontology;
  if (cfg.use_synth) {
    cfg.synth.emit_outcome_events = true;
    cfg.synth.include_booking = true;
    corpus = cas::synth_corpus(cfg.synth, cfg.seed);
    ontology = cas::synth_ontology(cfg.synth);
  } else {
    if (cfg.corpus_path.empty()) throw cas::InputError("extract: --corpus required");
    corpus = fs::is_directory(cfg.corpus_path)
                 ? cas::load_multiwoz(cfg.corpus_path, {})
                 : cas::load_corpus(cfg.corpus_path);
    if (cfg.ontology_path.empty()) throw cas::InputError("extract: --ontology required");
    ontology = cas::load_ontology(cfg.ontology_path);
  }

  cas::CooccurrenceStats stats =
      cas::collect_stats(corpus, ontology, cfg.horizon, cfg.max_subset);
  cas::ExtractionOptions opts;
  opts.support_floor = cfg.support_floor;
  cas::Hypergraph graph = cas::extract_hypergraph(stats, ontology, cfg.theta, opts);
  cas::ForbiddenSet forbidden;
  if (!cfg.forbidden_labels.empty())
    forbidden = graph.make_forbidden(cfg.forbidden_labels);
  cas::SoundnessReport sound = cas::soundness_report(graph, stats, cfg.theta, 0.15);

  cas::GraphSummary summary = cas::summarize_graph(graph, forbidden);
  std::printf("extracted |V|=%zu |F|=%zu conjunctive=%.1f%% mean_fan_in=%.2f "
              "max_fan_in=%zu min_rate=%.3f\n",
              summary.nodes, summary.arcs, summary.conjunctive_pct, summary.mean_fan_in,
              summary.max_fan_in, summary.min_rate);
  std::printf("soundness: max_bound=%.6f flagged=%zu of %zu arcs\n", sound.max_bound,
              sound.flagged_count, sound.rows.size());

  if (!f.out.empty()) {
    fs::create_directories(f.out);
    cas::save_hypergraph((fs::path(f.out) / "hypergraph.json").string(), graph, forbidden);
    cas::save_stats((fs::path(f.out) / "stats.json").string(), stats);
    std::ofstream srep(fs::path(f.out) / "soundness.csv", std::ios::binary);
    srep << "arc,target,rate,n_s,bound,flagged\n";
    for (const auto& row : sound.rows) {
      srep << row.arc << "," << row.target << "," << row.rate << "," << row.n_s << ","
           << row.bound << "," << (row.flagged ? 1 : 0) << "\n";
    }
    std::printf("wrote %s/{hypergraph.json,stats.json,soundness.csv}\n", f.out.c_str());
  }
  return 0;
}

int cmd_simulate(const CommonFlags& f, const CLI::App* cmd, double bound_delta) {
  cas::ExperimentConfig cfg = build_config(f, cmd);
  cas::Metrics metrics;
  if (cfg.emit_traces) {
    if (f.out.empty()) throw cas::InputError("--traces requires --out");
    fs::create_directories(f.out);
    metrics = cas::run_simulation_with_traces(cfg, f.out);
  } else {
    metrics = cas::run_simulation(cfg);
  }
  std::printf("graph: |V|=%zu |F|=%zu mean_K=%.3f\n", metrics.graph.nodes,
              metrics.graph.arcs, metrics.mean_k);
  print_cells(metrics);
  if (!f.out.empty()) {
    cas::emit_report(metrics, f.out);
    std::printf("wrote %s/{report.csv,report.json}\n", f.out.c_str());
  }

  if (bound_delta > 0.0) {
    // Structural hit-rate lower bound against the measured cas_pab cell at
    // the highest coverage level.
    const cas::CellMetrics* measured = nullptr;
    for (const auto& c : metrics.cells) {
      if (c.method != cas::Method::CasPab) continue;
      if (!measured || c.coverage > measured->coverage) measured = &c;
    }
    if (!measured)
      throw cas::InputError("--bound-delta requires the cas_pab method");
    cas::World world = cas::resolve_world(cfg);
    cas::HitRateBoundReport bound = cas::hit_rate_bound_report(
        world.graph, world.forbidden, world.corpus, world.projection,
        measured->coverage, bound_delta, measured->hit_rate);
    std::printf("hit-rate bound: %.6f (measured %.6f, cover %zu over %zu classes, "
                "mean |NMF| %.2f)%s\n",
                bound.bound, bound.measured, bound.cover_size,
                bound.distinct_classes, bound.mean_nmf,
                bound.vacuous ? " [vacuous at this scale]" : "");
    if (!f.out.empty()) {
      std::ofstream out(fs::path(f.out) / "bound.json", std::ios::binary);
      out << "{\n  \"delta_star\": " << bound_delta
          << ",\n  \"bound\": " << bound.bound << ",\n  \"measured\": "
          << bound.measured << ",\n  \"vacuous\": "
          << (bound.vacuous ? "true" : "false") << ",\n  \"cover_size\": "
          << bound.cover_size << ",\n  \"mean_nmf\": " << bound.mean_nmf << "\n}\n";
    }
  }
  return 0;
}

int cmd_omission(const CommonFlags& f, const CLI::App* cmd,
                 const std::vector<double>& r_levels) {
  cas::ExperimentConfig cfg = build_config(f, cmd);
  std::vector<double> levels =
      r_levels.empty() ? std::vector<double>{0.0, 0.05, 0.10, 0.20, 0.30} : r_levels;
  cas::OmissionReport report = cas::run_omission_experiment(cfg, levels);
  std::printf("%8s %18s %18s %12s %14s\n", "r", "safety_violation", "false_rejection",
              "pab_recall", "and_violation");
  for (const auto& row : report.rows)
    std::printf("%8.2f %18.4f %18.4f %12.4f %14.4f\n", row.r, row.safety_violation_rate,
                row.false_rejection_rate, row.pab_recall, row.and_violation_rate);
  if (!f.out.empty()) {
    cas::emit_omission_report(report, f.out);
    std::printf("wrote %s/{omission.csv,omission.json}\n", f.out.c_str());
  }
  return 0;
}

int cmd_unsound_demo(double tau, const std::string& out) {
  cas::UnsoundDemoReport report = cas::unsound_demo(tau);
  std::fputs(report.transcript.c_str(), stdout);
  std::printf("semantic_unsafe_hits=%d cas_unsafe_hits=%d\n",
              report.semantic_unsafe_hits, report.cas_unsafe_hits);
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream j(fs::path(out) / "unsound_demo.json", std::ios::binary);
    j << report.json;
    std::ofstream t(fs::path(out) / "unsound_demo.txt", std::ios::binary);
    t << report.transcript;
  }
  bool ok = report.semantic_unsafe_hits == 1 && report.cas_unsafe_hits == 0 &&
            report.semantic_hit && report.cas_rejected && report.cas_self_hit_safe;
  if (!ok) {
    std::fprintf(stderr, "unsound-demo assertions FAILED\n");
    return 2;
  }
  return 0;
}

int cmd_antichain(const std::string& hypergraph, std::size_t max_n) {
  if (hypergraph.empty()) throw cas::InputError("antichain: --hypergraph required");
  cas::HypergraphFile file = cas::load_hypergraph(hypergraph);
  auto sets = cas::minimal_unsafe_antichain_bruteforce(file.graph, file.forbidden, max_n);
  std::printf("minimal unsafe antichain: %zu set(s)\n", sets.size());
  for (const auto& s : sets) {
    std::string line = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) line += ", ";
      line += file.graph.label(s[i]);
    }
    line += "}";
    std::printf("%s\n", line.c_str());
  }
  return 0;
}

int cmd_report(const std::string& metrics_path, const std::string& out) {
  std::ifstream in(metrics_path);
  if (!in) throw cas::IoError("cannot open metrics file: " + metrics_path);
  std::stringstream ss;
  ss << in.rdbuf();
  cas::Metrics metrics = cas::metrics_from_json(ss.str());
  if (out.empty()) {
    std::fputs(cas::metrics_to_csv(metrics).c_str(), stdout);
  } else {
    cas::emit_report(metrics, out);
    std::printf("wrote %s/{report.csv,report.json}\n", out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified answer reuse harness"};
  app.require_subcommand(1);

  CommonFlags f_extract, f_sim, f_omit;
  std::vector<double> r_levels;
  double demo_tau = 0.85;
  std::string demo_out, anti_graph, report_metrics, report_out;
  std::size_t anti_max_n = 20;

  CLI::App* extract = app.add_subcommand("extract", "mine a hypergraph from a corpus");
  add_common(extract, f_extract);

  CLI::App* simulate = app.add_subcommand("simulate", "replay sessions across methods");
  add_common(simulate, f_sim);
  double bound_delta = 0.0;
  simulate->add_option("--bound-delta", bound_delta,
                       "also evaluate the structural hit-rate bound at this delta*");

  CLI::App* omission =
      app.add_subcommand("omission", "slot-omission degradation experiment");
  add_common(omission, f_omit);
  omission->add_option("--r-levels", r_levels, "omission rates")->delimiter(',');

  CLI::App* demo = app.add_subcommand("unsound-demo",
                                      "multi-tenant semantic cache unsoundness demo");
  demo->add_option("--tau", demo_tau, "similarity threshold");
  demo->add_option("--out", demo_out, "output directory");

  CLI::App* antichain =
      app.add_subcommand("antichain", "brute-force minimal unsafe antichain");
  antichain->add_option("--hypergraph", anti_graph, "hypergraph JSON")->required();
  antichain->add_option("--max-n", anti_max_n, "node-count cap");

  CLI::App* report = app.add_subcommand("report", "re-emit a saved metrics JSON");
  report->add_option("--metrics", report_metrics, "metrics JSON")->required();
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
    if (extract->parsed()) {
      cas::parallel::set_threads(f_extract.threads);
      return cmd_extract(f_extract, extract);
    }
    if (simulate->parsed()) {
      cas::parallel::set_threads(f_sim.threads);
      return cmd_simulate(f_sim, simulate, bound_delta);
    }
    if (omission->parsed()) {
      cas::parallel::set_threads(f_omit.threads);
      return cmd_omission(f_omit, omission, r_levels);
    }
    if (demo->parsed()) return cmd_unsound_demo(demo_tau, demo_out);
    if (antichain->parsed()) return cmd_antichain(anti_graph, anti_max_n);
    if (report->parsed()) return cmd_report(report_metrics, report_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
