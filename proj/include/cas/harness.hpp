#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cas/baselines.hpp"
#include "cas/corpus.hpp"
#include "cas/extraction.hpp"
#include "cas/multiwoz.hpp"
#include "cas/session.hpp"

namespace cas {

enum class Method : std::uint8_t { NoCache, Cosine, CasOnly, CasPab };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

/// Run scope shares one store across every session (the deployment posture);
/// session scope gives each session a cold store, which is what the exact
/// per-session RAG = K accounting of the session cost analysis assumes.
enum class CasScope : std::uint8_t { Run, Session };

struct ExperimentConfig {
  // Corpus: a native file, or the synthetic generator.
  std::string corpus_path;
  bool use_synth = false;
  SynthParams synth;

  // Hypergraph: a file, extraction from the corpus, or (synthetic runs) the
  // planted world graph.
  std::string hypergraph_path;
  bool extract_graph = false;
  std::string ontology_path;
  double theta = 0.75;
  std::size_t horizon = 3;
  std::size_t max_subset = 5;
  std::uint64_t support_floor = 30;

  std::string templates_path;
  std::vector<std::string> forbidden_labels;  // overrides the graph file's set
  /// Multi-tenant mode: per-tenant forbidden sets; sessions of unlisted
  /// tenants fall back to the shared set. The store stays shared, so
  /// cross-tenant reuse is rejected by snapshot or witness checks, not by
  /// partitioning the data.
  std::map<std::string, std::vector<std::string>> tenant_forbidden;
  MultiwozOptions multiwoz;

  std::vector<double> coverage_levels = {1.0};
  double tau = 0.85;
  CostModel cost;
  LookupPolicy lookup;
  std::uint64_t seed = 1;
  std::vector<Method> methods = {Method::NoCache, Method::Cosine, Method::CasOnly,
                                 Method::CasPab};
  CasScope cas_scope = CasScope::Run;
  std::optional<Projection> projection;  // default: value-level, slot-level for extracted graphs
  /// Best-effort corpora (adapter output) may carry labels outside the
  /// graph; lenient mode drops them instead of failing the run.
  bool lenient_labels = false;
  bool emit_traces = false;
};

ExperimentConfig config_from_json(const std::string& path);

/// Everything a replay needs, resolved from the config.
struct World {
  Corpus corpus;
  Hypergraph graph;
  ForbiddenSet forbidden;
  TemplateDb templates;
  Projection projection = Projection::SlotValue;
};

World resolve_world(const ExperimentConfig& config);

struct SessionMetrics {
  std::string session_id;
  std::size_t turns = 0;
  std::uint64_t rag = 0;
  std::uint64_t tier1 = 0;
  std::uint64_t tier2 = 0;
  std::uint64_t blocked = 0;
  std::size_t k = 0;
  std::uint64_t unsafe_hits = 0;
  std::uint64_t delta_total = 0;
  double cost_units = 0.0;
};

struct CellMetrics {
  Method method = Method::NoCache;
  double coverage = 1.0;
  std::vector<SessionMetrics> sessions;
  std::uint64_t total_turns = 0;
  double mean_rag = 0.0;
  double mean_k = 0.0;
  double tier1_rate = 0.0;
  double tier2_rate = 0.0;
  double hit_rate = 0.0;  // (tier1 + tier2) / turns
  double blocked_rate = 0.0;
  std::uint64_t unsafe_hits = 0;
  double unsafe_pct = 0.0;  // of cache hits
  double mean_cost = 0.0;
  std::uint64_t delta_total = 0;  // closure maintenance work across sessions
};

struct GraphSummary {
  std::size_t nodes = 0;
  std::size_t arcs = 0;
  double conjunctive_pct = 0.0;
  double mean_fan_in = 0.0;
  std::size_t max_fan_in = 0;
  double min_rate = 1.0;
  std::uint64_t defect_total = 0;
  double defect_mean = 0.0;
};

GraphSummary summarize_graph(const Hypergraph& h, const ForbiddenSet& f);

struct Metrics {
  GraphSummary graph;                       // table 1 shape
  std::map<std::size_t, std::size_t> k_histogram;  // table 2 shape
  double mean_k = 0.0;
  std::vector<CellMetrics> cells;           // tables 3 and 4 shape
};

/// Replays every session through each configured method and coverage level.
/// Cells run in parallel; sessions within a cell replay serially in corpus
/// order against the cell's store, so results are schedule-independent.
Metrics run_simulation(const ExperimentConfig& config);

/// Serial variant that also writes one per-turn trace file per cell
/// (trace_<method>_p<coverage>.jsonl) into out_dir.
Metrics run_simulation_with_traces(const ExperimentConfig& config,
                                   const std::string& out_dir);

struct OmissionRow {
  double r = 0.0;
  double safety_violation_rate = 0.0;
  double false_rejection_rate = 0.0;
  double pab_recall = 1.0;
  double and_violation_rate = 0.0;
};

struct OmissionReport {
  std::vector<OmissionRow> rows;
};

/// Gate verdicts and PAB contents under injected slot omission versus the
/// oracle belief states. Sessions are compared independently in parallel.
OmissionReport run_omission_experiment(const ExperimentConfig& config,
                                       const std::vector<double>& r_levels);

struct HitRateBoundReport {
  double bound = 0.0;
  bool vacuous = false;
  double measured = 0.0;
  std::size_t cover_size = 0;   // greedy (delta*/2)-cover of observed classes
  double mean_nmf = 0.0;
  std::size_t distinct_classes = 0;
};

HitRateBoundReport hit_rate_bound_report(const Hypergraph& h, const ForbiddenSet& f,
                                         const Corpus& corpus, Projection projection,
                                         double p, double delta_star,
                                         double measured_hit_rate);

/// CSV + JSON with stable ordering and fixed float formatting; identical
/// configs and seeds reproduce the files byte for byte.
void emit_report(const Metrics& metrics, const std::string& out_dir);
void emit_omission_report(const OmissionReport& report, const std::string& out_dir);
std::string metrics_to_json(const Metrics& metrics);
std::string metrics_to_csv(const Metrics& metrics);
/// Inverse of metrics_to_json at aggregate granularity (per-session rows are
/// not serialized); supports the report subcommand.
Metrics metrics_from_json(const std::string& json_text);
std::string omission_to_json(const OmissionReport& report);
std::string omission_to_csv(const OmissionReport& report);

}  // namespace cas
