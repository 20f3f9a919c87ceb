#include "cas/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cas/errors.hpp"
#include "cas/multiwoz.hpp"
#include "cas/parallel.hpp"
#include "cas/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace cas {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::NoCache: return "no_cache";
    case Method::Cosine: return "cosine";
    case Method::CasOnly: return "cas_only";
    case Method::CasPab: return "cas_pab";
  }
  return "no_cache";
}

Method method_from_string(std::string_view s) {
  if (s == "no_cache") return Method::NoCache;
  if (s == "cosine") return Method::Cosine;
  if (s == "cas_only") return Method::CasOnly;
  if (s == "cas_pab") return Method::CasPab;
  throw InputError("unknown method: " + std::string(s));
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

SynthParams synth_from_json(const nlohmann::json& j) {
  SynthParams p;
  p.n_sessions = j.value("n_sessions", p.n_sessions);
  if (j.contains("domains")) {
    p.domains.clear();
    for (const auto& d : j["domains"]) {
      SynthDomain sd;
      sd.name = d.at("name").get<std::string>();
      sd.query_slots = d.value("query_slots", std::vector<std::string>{});
      sd.booking_slots = d.value("booking_slots", std::vector<std::string>{});
      sd.followup_caps = d.value("followup_caps", std::vector<std::string>{});
      sd.retrieval_rate = d.value("retrieval_rate", 1.0);
      sd.booking_rate = d.value("booking_rate", 1.0);
      sd.values_per_slot = d.value("values_per_slot", std::size_t{6});
      p.domains.push_back(std::move(sd));
    }
  }
  p.k_weights = j.value("k_weights", p.k_weights);
  p.tenants = j.value("tenants", p.tenants);
  p.followups_per_class = j.value("followups_per_class", p.followups_per_class);
  p.repeat_rate = j.value("repeat_rate", p.repeat_rate);
  p.duplicate_answer_rate = j.value("duplicate_answer_rate", p.duplicate_answer_rate);
  p.emit_outcome_events = j.value("emit_outcome_events", p.emit_outcome_events);
  p.horizon = j.value("horizon", p.horizon);
  p.include_booking = j.value("include_booking", p.include_booking);
  p.forbidden_session_rate = j.value("forbidden_session_rate", p.forbidden_session_rate);
  return p;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  c.corpus_path = j.value("corpus", std::string());
  if (j.contains("synth")) {
    c.use_synth = true;
    c.synth = synth_from_json(j["synth"]);
  }
  c.hypergraph_path = j.value("hypergraph", std::string());
  c.extract_graph = j.value("extract", false);
  c.ontology_path = j.value("ontology", std::string());
  c.theta = j.value("theta", c.theta);
  c.horizon = j.value("horizon", c.horizon);
  c.max_subset = j.value("max_subset", c.max_subset);
  c.support_floor = j.value("support_floor", c.support_floor);
  c.templates_path = j.value("templates", std::string());
  c.forbidden_labels = j.value("forbidden", std::vector<std::string>{});
  if (j.contains("tenant_forbidden")) {
    for (auto it = j["tenant_forbidden"].begin(); it != j["tenant_forbidden"].end(); ++it)
      c.tenant_forbidden[it.key()] = it.value().get<std::vector<std::string>>();
  }
  if (j.contains("multiwoz")) {
    const auto& mw = j["multiwoz"];
    c.multiwoz.split = mw.value("split", std::string());
    c.multiwoz.acts_path = mw.value("acts_path", std::string());
    if (mw.contains("retrieved_acts"))
      c.multiwoz.act_map.retrieved_acts =
          mw["retrieved_acts"].get<std::vector<std::string>>();
    if (mw.contains("booked_acts"))
      c.multiwoz.act_map.booked_acts =
          mw["booked_acts"].get<std::vector<std::string>>();
  }
  c.coverage_levels = j.value("coverage", c.coverage_levels);
  c.tau = j.value("tau", c.tau);
  if (j.contains("cost_model")) {
    c.cost.rag_units = j["cost_model"].value("rag", c.cost.rag_units);
    c.cost.tier2_units = j["cost_model"].value("tier2", c.cost.tier2_units);
    c.cost.tier1_units = j["cost_model"].value("tier1", c.cost.tier1_units);
  }
  c.lookup.sim_floor = j.value("sim_floor", c.lookup.sim_floor);
  c.lookup.refined_invalidation = j.value("refined_invalidation", false);
  if (!j.contains("seed")) throw InputError("config: seed is mandatory");
  c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j["methods"]) c.methods.push_back(method_from_string(m.get<std::string>()));
  }
  if (j.contains("cas_scope")) {
    std::string s = j["cas_scope"].get<std::string>();
    if (s == "run") c.cas_scope = CasScope::Run;
    else if (s == "session") c.cas_scope = CasScope::Session;
    else throw InputError("config: cas_scope must be run or session");
  }
  if (j.contains("projection")) {
    std::string s = j["projection"].get<std::string>();
    if (s == "slot_value") c.projection = Projection::SlotValue;
    else if (s == "slot") c.projection = Projection::SlotLevel;
    else throw InputError("config: projection must be slot_value or slot");
  }
  c.lenient_labels = j.value("lenient_labels", false);
  c.emit_traces = j.value("emit_traces", false);
  return c;
}

World resolve_world(const ExperimentConfig& config) {
  World world;
  bool have_world_graph = false;

  if (config.use_synth) {
    SynthWorld sw = synth_world(config.synth, config.seed);
    world.corpus = std::move(sw.corpus);
    world.graph = std::move(sw.graph);
    world.forbidden = std::move(sw.forbidden);
    world.templates = TemplateDb(std::move(sw.templates));
    world.projection = Projection::SlotValue;
    have_world_graph = true;
  } else if (!config.corpus_path.empty()) {
    if (fs::is_directory(config.corpus_path)) {
      world.corpus = load_multiwoz(config.corpus_path, config.multiwoz);
    } else {
      world.corpus = load_corpus(config.corpus_path);
      if (world.corpus.provenance.kind == CorpusKind::Multiwoz)
        world.projection = Projection::SlotLevel;
    }
  } else {
    throw InputError("config: either a corpus path or synth params are required");
  }

  if (!config.hypergraph_path.empty()) {
    HypergraphFile f = load_hypergraph(config.hypergraph_path);
    world.graph = std::move(f.graph);
    world.forbidden = std::move(f.forbidden);
    world.projection = Projection::SlotLevel;
    have_world_graph = true;
  } else if (config.extract_graph) {
    Ontology ontology = config.ontology_path.empty()
                            ? synth_ontology(config.synth)
                            : load_ontology(config.ontology_path);
    CooccurrenceStats stats =
        collect_stats(world.corpus, ontology, config.horizon, config.max_subset);
    ExtractionOptions opts;
    opts.support_floor = config.support_floor;
    world.graph = extract_hypergraph(stats, ontology, config.theta, opts);
    world.forbidden = ForbiddenSet{};
    world.projection = Projection::SlotLevel;
    have_world_graph = true;
  }
  if (!have_world_graph)
    throw InputError("config: no hypergraph (file, extraction, or synth world)");

  if (!config.forbidden_labels.empty())
    world.forbidden = world.graph.make_forbidden(config.forbidden_labels);
  if (!config.templates_path.empty())
    world.templates = TemplateDb::load(config.templates_path);
  if (config.projection) world.projection = *config.projection;
  return world;
}

GraphSummary summarize_graph(const Hypergraph& h, const ForbiddenSet& f) {
  GraphSummary g;
  g.nodes = h.node_count();
  g.arcs = h.arc_count();
  std::size_t conjunctive = 0;
  std::size_t fan_in_total = 0;
  for (const auto& arc : h.arcs()) {
    fan_in_total += arc.sources.size();
    g.max_fan_in = std::max(g.max_fan_in, arc.sources.size());
    if (arc.sources.size() >= 2) ++conjunctive;
    g.min_rate = std::min(g.min_rate, arc.rate);
  }
  if (g.arcs > 0) {
    g.conjunctive_pct = 100.0 * static_cast<double>(conjunctive) / static_cast<double>(g.arcs);
    g.mean_fan_in = static_cast<double>(fan_in_total) / static_cast<double>(g.arcs);
  } else {
    g.min_rate = 0.0;
  }
  DefectReport defect = compositionality_defect(h, f);
  g.defect_total = defect.total;
  g.defect_mean = defect.mean_per_conjunctive;
  return g;
}

namespace {

struct PreparedTurn {
  TurnRequest request;
  bool multi_slot = false;
};

struct PreparedSession {
  std::string session_id;
  std::string tenant;
  std::vector<PreparedTurn> turns;
  std::size_t k = 0;
};

PreparedSession prepare_session(const DialogueSession& s, const Hypergraph& h,
                                Projection projection, bool lenient) {
  PreparedSession out;
  out.session_id = s.session_id;
  if (!s.turns.empty() && s.turns.front().tenant) out.tenant = *s.turns.front().tenant;
  std::vector<NodeSet> phis;
  for (const auto& turn : s.turns) {
    PreparedTurn pt;
    if (lenient) {
      NodeSet phi;
      for (const auto& label : phi_labels(turn, projection))
        if (auto id = h.find_node(label)) phi.push_back(*id);
      pt.request.phi = make_set(std::move(phi));
    } else {
      pt.request.phi = resolve_phi(h, turn, projection);
    }
    if (auto id = h.find_node(turn.primary_capability)) {
      pt.request.primary = *id;
    } else if (!lenient) {
      throw InputError("unresolvable primary capability in turn " +
                       std::to_string(turn.turn_id) + ": " + turn.primary_capability);
    }
    pt.request.gold_answer = turn.answer_text;
    if (turn.query_text)
      pt.request.query_text = *turn.query_text;
    else
      pt.request.query_text =
          turn.answer_text ? *turn.answer_text : "q: " + turn.primary_capability;
    std::size_t slot_count = 0;
    for (const auto& [d, slots] : turn.belief_state) slot_count += slots.size();
    pt.multi_slot = slot_count >= 2;
    phis.push_back(pt.request.phi);
    out.turns.push_back(std::move(pt));
  }
  out.k = ontological_class_count(h, phis);
  return out;
}

std::vector<PreparedSession> prepare_all(const World& world, bool lenient) {
  std::vector<PreparedSession> prepared(world.corpus.sessions.size());
  // Surface input errors deterministically rather than racing them out of a
  // parallel loop.
  std::vector<std::string> errors(world.corpus.sessions.size());
  parallel::parallel_for(world.corpus.sessions.size(), [&](std::size_t i) {
    try {
      prepared[i] =
          prepare_session(world.corpus.sessions[i], world.graph, world.projection, lenient);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw InputError(e);
  return prepared;
}

struct TraceSink {
  bool enabled = false;
  std::ostringstream lines;

  void record(const std::string& session_id, std::size_t turn,
              const TurnOutcome& outcome, const SessionCounters& counters) {
    if (!enabled) return;
    nlohmann::ordered_json j;
    j["session"] = session_id;
    j["turn"] = turn;
    j["served_by"] =
        outcome.served_by ? std::string(to_string(*outcome.served_by)) : "blocked";
    j["delta"] = outcome.delta.size();
    j["rag_calls"] = counters.rag_calls;
    j["tier1"] = counters.tier1_hits;
    j["tier2"] = counters.tier2_hits;
    j["blocked"] = counters.blocked;
    j["cost_units"] = counters.cost_units;
    j["safety"] = outcome.safety == SafetyVerdict::Pass ? "pass" : "blocked";
    lines << j.dump() << "\n";
  }
};

// Witness used by the similarity-only baseline's audit column: the minimal
// witness of the primary when certifiable, the whole capability set otherwise.
NodeSet audit_witness(const SessionState& state, const std::optional<NodeId>& primary) {
  if (primary && state.closure_contains(*primary)) {
    return min_witness(state.graph(), state.capability_set(),
                       state.session_certificate(), *primary)
        .members;
  }
  return state.capability_set();
}

CellMetrics replay_cell(const World& world, const std::vector<PreparedSession>& prepared,
                        const ExperimentConfig& config, Method method, double coverage,
                        TraceSink* trace) {
  CellMetrics cell;
  cell.method = method;
  cell.coverage = coverage;

  TemplateDb tdb = world.templates.with_coverage(coverage, config.seed);
  CasStore run_store;
  SemanticCache cosine_cache(config.tau);

  std::map<std::string, ForbiddenSet> tenant_forbidden;
  for (const auto& [tenant, labels] : config.tenant_forbidden)
    tenant_forbidden[tenant] = world.graph.make_forbidden(labels);

  for (const auto& ps : prepared) {
    SessionMetrics sm;
    sm.session_id = ps.session_id;
    sm.turns = ps.turns.size();
    sm.k = ps.k;

    SessionConfig sc;
    sc.cost = config.cost;
    sc.lookup = config.lookup;
    sc.use_pab = method == Method::CasPab;
    auto tf = tenant_forbidden.find(ps.tenant);
    SessionState state(world.graph,
                       tf == tenant_forbidden.end() ? world.forbidden : tf->second, sc);
    CasStore session_store;
    CasStore& store = config.cas_scope == CasScope::Run ? run_store : session_store;

    for (std::size_t ti = 0; ti < ps.turns.size(); ++ti) {
      const TurnRequest& req = ps.turns[ti].request;
      if (method == Method::CasOnly || method == Method::CasPab) {
        TurnOutcome outcome = state.process_turn(req, store, tdb);
        if (outcome.served_by && outcome.safety == SafetyVerdict::Pass &&
            *outcome.served_by != ServedBy::Rag) {
          // Audit every cache-served answer: the witness (certificate base)
          // must sit inside the current session closure.
          bool contained = true;
          for (NodeId w : outcome.cert.base)
            if (!state.closure_contains(w)) { contained = false; break; }
          if (!contained) ++sm.unsafe_hits;
        }
        if (trace) trace->record(ps.session_id, ti, outcome, state.counters());
      } else {
        // Baseline lanes share the closure/gate machinery but skip the
        // certified store.
        NodeSet delta = state.advance(req.phi);
        TurnOutcome outcome;
        outcome.delta = std::move(delta);
        outcome.cert.graph_version = world.graph.version();
        if (!state.gate_safe()) {
          ++sm.blocked;
          outcome.safety = SafetyVerdict::Blocked;
        } else if (method == Method::Cosine) {
          Embedding query = embed(req.query_text);
          if (auto hit = cosine_cache.lookup(query)) {
            ++sm.tier2;
            sm.cost_units += config.cost.tier2_units;
            outcome.served_by = ServedBy::Tier2Cas;
            outcome.answer = cosine_cache.entry(hit->id).answer;
            if (unsafe_hit_audit(cosine_cache.entry(hit->id), state.session_closure()))
              ++sm.unsafe_hits;
          } else {
            ++sm.rag;
            sm.cost_units += config.cost.rag_units;
            outcome.served_by = ServedBy::Rag;
            outcome.answer = req.gold_answer
                                 ? *req.gold_answer
                                 : "RAG(" + (req.primary
                                                 ? world.graph.label(*req.primary)
                                                 : std::string("unknown")) +
                                       ")";
            cosine_cache.put(outcome.answer, ps.tenant, audit_witness(state, req.primary));
          }
        } else {  // NoCache
          ++sm.rag;
          sm.cost_units += config.cost.rag_units;
          outcome.served_by = ServedBy::Rag;
          outcome.answer = req.gold_answer ? *req.gold_answer : "RAG()";
        }
        if (trace) {
          SessionCounters snapshot;
          snapshot.rag_calls = sm.rag;
          snapshot.tier2_hits = sm.tier2;
          snapshot.blocked = sm.blocked;
          snapshot.cost_units = sm.cost_units;
          trace->record(ps.session_id, ti, outcome, snapshot);
        }
      }
    }

    if (method == Method::CasOnly || method == Method::CasPab) {
      const SessionCounters& c = state.counters();
      sm.rag = c.rag_calls;
      sm.tier1 = c.tier1_hits;
      sm.tier2 = c.tier2_hits;
      sm.blocked = c.blocked;
      sm.cost_units = c.cost_units;
    }
    sm.delta_total = state.counters().delta_total;
    cell.sessions.push_back(std::move(sm));
  }

  std::uint64_t rag = 0, t1 = 0, t2 = 0, blocked = 0, unsafe = 0, delta = 0;
  double cost = 0.0, ksum = 0.0;
  for (const auto& sm : cell.sessions) {
    cell.total_turns += sm.turns;
    rag += sm.rag;
    t1 += sm.tier1;
    t2 += sm.tier2;
    blocked += sm.blocked;
    unsafe += sm.unsafe_hits;
    delta += sm.delta_total;
    cost += sm.cost_units;
    ksum += static_cast<double>(sm.k);
  }
  const double ns = cell.sessions.empty() ? 1.0 : static_cast<double>(cell.sessions.size());
  const double turns = cell.total_turns == 0 ? 1.0 : static_cast<double>(cell.total_turns);
  cell.mean_rag = static_cast<double>(rag) / ns;
  cell.mean_k = ksum / ns;
  cell.tier1_rate = static_cast<double>(t1) / turns;
  cell.tier2_rate = static_cast<double>(t2) / turns;
  cell.hit_rate = static_cast<double>(t1 + t2) / turns;
  cell.blocked_rate = static_cast<double>(blocked) / turns;
  cell.unsafe_hits = unsafe;
  cell.unsafe_pct = (t1 + t2) == 0 ? 0.0 : 100.0 * static_cast<double>(unsafe) /
                                               static_cast<double>(t1 + t2);
  cell.mean_cost = cost / ns;
  cell.delta_total = delta;
  return cell;
}

}  // namespace

Metrics run_simulation(const ExperimentConfig& config) {
  for (double p : config.coverage_levels)
    if (!(p >= 0.0 && p <= 1.0))
      throw InputError("config: coverage level outside [0,1]");
  if (config.methods.empty()) throw InputError("config: no methods selected");

  World world = resolve_world(config);
  std::vector<PreparedSession> prepared = prepare_all(world, config.lenient_labels);

  Metrics metrics;
  metrics.graph = summarize_graph(world.graph, world.forbidden);
  double ksum = 0.0;
  for (const auto& ps : prepared) {
    ++metrics.k_histogram[ps.k];
    ksum += static_cast<double>(ps.k);
  }
  metrics.mean_k = prepared.empty() ? 0.0 : ksum / static_cast<double>(prepared.size());

  struct CellSpec {
    Method method;
    double coverage;
  };
  std::vector<CellSpec> specs;
  for (Method m : config.methods) {
    if (m == Method::CasOnly || m == Method::CasPab) {
      for (double p : config.coverage_levels) specs.push_back({m, p});
    } else {
      specs.push_back({m, 1.0});
    }
  }

  metrics.cells.resize(specs.size());
  std::vector<std::string> errors(specs.size());
  parallel::parallel_for(specs.size(), [&](std::size_t i) {
    try {
      metrics.cells[i] =
          replay_cell(world, prepared, config, specs[i].method, specs[i].coverage, nullptr);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw InputError(e);
  return metrics;
}

Metrics run_simulation_with_traces(const ExperimentConfig& config,
                                   const std::string& out_dir) {
  // Trace emission replays serially so line order is stable.
  World world = resolve_world(config);
  std::vector<PreparedSession> prepared = prepare_all(world, config.lenient_labels);

  Metrics metrics;
  metrics.graph = summarize_graph(world.graph, world.forbidden);
  double ksum = 0.0;
  for (const auto& ps : prepared) {
    ++metrics.k_histogram[ps.k];
    ksum += static_cast<double>(ps.k);
  }
  metrics.mean_k = prepared.empty() ? 0.0 : ksum / static_cast<double>(prepared.size());

  for (Method m : config.methods) {
    std::vector<double> levels =
        (m == Method::CasOnly || m == Method::CasPab) ? config.coverage_levels
                                                      : std::vector<double>{1.0};
    for (double p : levels) {
      TraceSink sink;
      sink.enabled = true;
      metrics.cells.push_back(replay_cell(world, prepared, config, m, p, &sink));
      std::ostringstream name;
      name << "trace_" << to_string(m) << "_p" << static_cast<int>(p * 100 + 0.5)
           << ".jsonl";
      std::ofstream out(fs::path(out_dir) / name.str(), std::ios::binary);
      if (!out) throw IoError("cannot write trace file in " + out_dir);
      out << sink.lines.str();
    }
  }
  return metrics;
}

OmissionReport run_omission_experiment(const ExperimentConfig& config,
                                       const std::vector<double>& r_levels) {
  ExperimentConfig cfg = config;
  cfg.coverage_levels = {1.0};
  World world = resolve_world(cfg);

  OmissionReport report;
  Rng seed_stream(config.seed);
  for (std::size_t ri = 0; ri < r_levels.size(); ++ri) {
    double r = r_levels[ri];
    std::uint64_t inj_seed = seed_stream.fork(ri).next_u64();
    Corpus injected = inject_slot_omission(world.corpus, r, inj_seed);

    World oracle_world = world;
    World injected_world = world;
    injected_world.corpus = injected;
    std::vector<PreparedSession> oracle = prepare_all(oracle_world, cfg.lenient_labels);
    std::vector<PreparedSession> inj = prepare_all(injected_world, cfg.lenient_labels);

    struct SessionCompare {
      bool safety_violation = false;
      bool false_rejection = false;
      std::size_t pab_oracle = 0;
      std::size_t pab_hit = 0;
      std::size_t multi_slot_turns = 0;
      std::size_t and_violations = 0;
    };
    std::vector<SessionCompare> rows(oracle.size());

    parallel::parallel_for(oracle.size(), [&](std::size_t i) {
      SessionCompare& row = rows[i];
      SessionConfig sc;
      sc.cost = cfg.cost;
      sc.lookup = cfg.lookup;
      sc.use_pab = true;

      SessionState so(world.graph, world.forbidden, sc);
      SessionState si(world.graph, world.forbidden, sc);
      CasStore store_o, store_i;

      const auto& ot = oracle[i].turns;
      const auto& it = inj[i].turns;
      for (std::size_t t = 0; t < ot.size(); ++t) {
        TurnOutcome oo = so.process_turn(ot[t].request, store_o, world.templates);
        TurnOutcome oi = si.process_turn(it[t].request, store_i, world.templates);
        bool oracle_blocked = oo.safety == SafetyVerdict::Blocked;
        bool inj_blocked = oi.safety == SafetyVerdict::Blocked;
        if (oracle_blocked && !inj_blocked) row.safety_violation = true;
        if (!oracle_blocked && inj_blocked) row.false_rejection = true;
        if (ot[t].multi_slot) {
          ++row.multi_slot_turns;
          // A fired arc with uncovered sources would be an AND-violation;
          // verify the firing log instead of assuming the engine is right.
          for (ArcId a : si.session_certificate().firings)
            for (NodeId s : world.graph.arc(a).sources)
              if (!si.closure_contains(s)) ++row.and_violations;
        }
      }
      for (const auto& kv : so.pab()) {
        ++row.pab_oracle;
        if (si.pab().count(kv.first)) ++row.pab_hit;
      }
    });

    OmissionRow out;
    out.r = r;
    std::size_t sv = 0, fr = 0, pab_o = 0, pab_h = 0, ms = 0, av = 0;
    for (const auto& row : rows) {
      sv += row.safety_violation ? 1 : 0;
      fr += row.false_rejection ? 1 : 0;
      pab_o += row.pab_oracle;
      pab_h += row.pab_hit;
      ms += row.multi_slot_turns;
      av += row.and_violations;
    }
    const double ns = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    out.safety_violation_rate = static_cast<double>(sv) / ns;
    out.false_rejection_rate = static_cast<double>(fr) / ns;
    out.pab_recall = pab_o == 0 ? 1.0 : static_cast<double>(pab_h) / static_cast<double>(pab_o);
    out.and_violation_rate = ms == 0 ? 0.0 : static_cast<double>(av) / static_cast<double>(ms);
    report.rows.push_back(out);
  }
  return report;
}

HitRateBoundReport hit_rate_bound_report(const Hypergraph& h, const ForbiddenSet& f,
                                         const Corpus& corpus, Projection projection,
                                         double p, double delta_star,
                                         double measured_hit_rate) {
  HitRateBoundReport report;
  report.measured = measured_hit_rate;

  std::set<NodeSet> class_set;
  std::vector<NodeSet> session_caps;
  for (const auto& s : corpus.sessions) {
    NodeSet all;
    for (const auto& t : s.turns) {
      NodeSet phi;
      for (const auto& label : phi_labels(t, projection))
        if (auto id = h.find_node(label)) phi.push_back(*id);
      phi = make_set(std::move(phi));
      class_set.insert(closure(h, phi));
      all = set_union(all, phi);
    }
    session_caps.push_back(std::move(all));
  }
  std::vector<NodeSet> classes(class_set.begin(), class_set.end());
  report.distinct_classes = classes.size();

  // Greedy (delta*/2)-cover under symmetric-difference distance.
  const double radius = delta_star / 2.0;
  std::vector<char> covered(classes.size(), 0);
  std::size_t uncovered = classes.size();
  while (uncovered > 0) {
    std::size_t best = 0, best_cover = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      std::size_t c = 0;
      for (std::size_t jj = 0; jj < classes.size(); ++jj) {
        if (covered[jj]) continue;
        NodeSet diff = set_difference(classes[i], classes[jj]);
        NodeSet diff2 = set_difference(classes[jj], classes[i]);
        if (static_cast<double>(diff.size() + diff2.size()) <= radius) ++c;
      }
      if (c > best_cover) {
        best_cover = c;
        best = i;
      }
    }
    if (best_cover == 0) {  // radius too small: each class covers itself
      for (std::size_t jj = 0; jj < classes.size(); ++jj)
        if (!covered[jj]) { covered[jj] = 1; --uncovered; ++report.cover_size; }
      break;
    }
    ++report.cover_size;
    for (std::size_t jj = 0; jj < classes.size(); ++jj) {
      if (covered[jj]) continue;
      NodeSet diff = set_difference(classes[best], classes[jj]);
      NodeSet diff2 = set_difference(classes[jj], classes[best]);
      if (static_cast<double>(diff.size() + diff2.size()) <= radius) {
        covered[jj] = 1;
        --uncovered;
      }
    }
  }

  double nmf_total = 0.0;
  for (const auto& caps : session_caps)
    nmf_total += static_cast<double>(near_miss_frontier(h, f, caps).size());
  report.mean_nmf =
      session_caps.empty() ? 0.0 : nmf_total / static_cast<double>(session_caps.size());

  const double n = static_cast<double>(h.node_count());
  if (n > 0.0) {
    double cover_term =
        1.0 - static_cast<double>(report.cover_size) * std::exp(-delta_star / (2.0 * n));
    double nmf_term = 1.0 - report.mean_nmf / n;
    report.bound = p * cover_term * nmf_term;
  }
  report.vacuous = report.bound <= 0.0;
  return report;
}

std::string metrics_to_csv(const Metrics& m) {
  std::ostringstream os;
  os << "section,key,value\n";
  os << "graph,nodes," << m.graph.nodes << "\n";
  os << "graph,arcs," << m.graph.arcs << "\n";
  os << "graph,conjunctive_pct," << fmt6(m.graph.conjunctive_pct) << "\n";
  os << "graph,mean_fan_in," << fmt6(m.graph.mean_fan_in) << "\n";
  os << "graph,max_fan_in," << m.graph.max_fan_in << "\n";
  os << "graph,min_rate," << fmt6(m.graph.min_rate) << "\n";
  os << "graph,defect_total," << m.graph.defect_total << "\n";
  os << "graph,defect_mean_per_conjunctive," << fmt6(m.graph.defect_mean) << "\n";
  for (const auto& [k, count] : m.k_histogram)
    os << "k_hist," << k << "," << count << "\n";
  os << "k_hist,mean," << fmt6(m.mean_k) << "\n";
  os << "cells,method,coverage,sessions,turns,mean_rag,mean_k,tier1_rate,tier2_rate,"
        "hit_rate,blocked_rate,unsafe_hits,unsafe_pct,mean_cost,delta_total\n";
  for (const auto& c : m.cells) {
    os << "cells," << to_string(c.method) << "," << fmt6(c.coverage) << ","
       << c.sessions.size() << "," << c.total_turns << "," << fmt6(c.mean_rag) << ","
       << fmt6(c.mean_k) << "," << fmt6(c.tier1_rate) << "," << fmt6(c.tier2_rate) << ","
       << fmt6(c.hit_rate) << "," << fmt6(c.blocked_rate) << "," << c.unsafe_hits << ","
       << fmt6(c.unsafe_pct) << "," << fmt6(c.mean_cost) << "," << c.delta_total << "\n";
  }
  return os.str();
}

std::string metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["graph"] = {{"nodes", m.graph.nodes},
                {"arcs", m.graph.arcs},
                {"conjunctive_pct", m.graph.conjunctive_pct},
                {"mean_fan_in", m.graph.mean_fan_in},
                {"max_fan_in", m.graph.max_fan_in},
                {"min_rate", m.graph.min_rate},
                {"defect_total", m.graph.defect_total},
                {"defect_mean_per_conjunctive", m.graph.defect_mean}};
  j["k_histogram"] = nlohmann::ordered_json::object();
  for (const auto& [k, count] : m.k_histogram)
    j["k_histogram"][std::to_string(k)] = count;
  j["mean_k"] = m.mean_k;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : m.cells) {
    nlohmann::ordered_json jc;
    jc["method"] = std::string(to_string(c.method));
    jc["coverage"] = c.coverage;
    jc["sessions"] = c.sessions.size();
    jc["turns"] = c.total_turns;
    jc["mean_rag"] = c.mean_rag;
    jc["mean_k"] = c.mean_k;
    jc["tier1_rate"] = c.tier1_rate;
    jc["tier2_rate"] = c.tier2_rate;
    jc["hit_rate"] = c.hit_rate;
    jc["blocked_rate"] = c.blocked_rate;
    jc["unsafe_hits"] = c.unsafe_hits;
    jc["unsafe_pct"] = c.unsafe_pct;
    jc["mean_cost"] = c.mean_cost;
    jc["delta_total"] = c.delta_total;
    j["cells"].push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

Metrics metrics_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("metrics parse error: ") + e.what());
  }
  Metrics m;
  const auto& g = j.at("graph");
  m.graph.nodes = g.at("nodes").get<std::size_t>();
  m.graph.arcs = g.at("arcs").get<std::size_t>();
  m.graph.conjunctive_pct = g.at("conjunctive_pct").get<double>();
  m.graph.mean_fan_in = g.at("mean_fan_in").get<double>();
  m.graph.max_fan_in = g.at("max_fan_in").get<std::size_t>();
  m.graph.min_rate = g.at("min_rate").get<double>();
  m.graph.defect_total = g.at("defect_total").get<std::uint64_t>();
  m.graph.defect_mean = g.at("defect_mean_per_conjunctive").get<double>();
  for (auto it = j.at("k_histogram").begin(); it != j.at("k_histogram").end(); ++it)
    m.k_histogram[std::stoul(it.key())] = it.value().get<std::size_t>();
  m.mean_k = j.at("mean_k").get<double>();
  for (const auto& jc : j.at("cells")) {
    CellMetrics c;
    c.method = method_from_string(jc.at("method").get<std::string>());
    c.coverage = jc.at("coverage").get<double>();
    c.sessions.resize(jc.at("sessions").get<std::size_t>());
    c.total_turns = jc.at("turns").get<std::uint64_t>();
    c.mean_rag = jc.at("mean_rag").get<double>();
    c.mean_k = jc.at("mean_k").get<double>();
    c.tier1_rate = jc.at("tier1_rate").get<double>();
    c.tier2_rate = jc.at("tier2_rate").get<double>();
    c.hit_rate = jc.at("hit_rate").get<double>();
    c.blocked_rate = jc.at("blocked_rate").get<double>();
    c.unsafe_hits = jc.at("unsafe_hits").get<std::uint64_t>();
    c.unsafe_pct = jc.at("unsafe_pct").get<double>();
    c.mean_cost = jc.at("mean_cost").get<double>();
    c.delta_total = jc.at("delta_total").get<std::uint64_t>();
    m.cells.push_back(std::move(c));
  }
  return m;
}

std::string omission_to_csv(const OmissionReport& report) {
  std::ostringstream os;
  os << "r,safety_violation_rate,false_rejection_rate,pab_recall,and_violation_rate\n";
  for (const auto& row : report.rows) {
    os << fmt6(row.r) << "," << fmt6(row.safety_violation_rate) << ","
       << fmt6(row.false_rejection_rate) << "," << fmt6(row.pab_recall) << ","
       << fmt6(row.and_violation_rate) << "\n";
  }
  return os.str();
}

std::string omission_to_json(const OmissionReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    j.push_back({{"r", row.r},
                 {"safety_violation_rate", row.safety_violation_rate},
                 {"false_rejection_rate", row.false_rejection_rate},
                 {"pab_recall", row.pab_recall},
                 {"and_violation_rate", row.and_violation_rate}});
  }
  return j.dump(2) + "\n";
}

void emit_report(const Metrics& metrics, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "report.csv", std::ios::binary);
    if (!out) throw IoError("cannot write report.csv in " + out_dir);
    out << metrics_to_csv(metrics);
  }
  {
    std::ofstream out(fs::path(out_dir) / "report.json", std::ios::binary);
    if (!out) throw IoError("cannot write report.json in " + out_dir);
    out << metrics_to_json(metrics);
  }
}

void emit_omission_report(const OmissionReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "omission.csv", std::ios::binary);
    if (!out) throw IoError("cannot write omission.csv in " + out_dir);
    out << omission_to_csv(report);
  }
  {
    std::ofstream out(fs::path(out_dir) / "omission.json", std::ios::binary);
    if (!out) throw IoError("cannot write omission.json in " + out_dir);
    out << omission_to_json(report);
  }
}

}  // namespace cas
