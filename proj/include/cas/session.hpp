#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cas/store.hpp"

namespace cas {

/// Simulated cost units; wall clock is never a correctness target.
struct CostModel {
  double rag_units = 1000.0;
  double tier2_units = 10.0;
  double tier1_units = 1.0;
};

struct SessionConfig {
  CostModel cost;
  LookupPolicy lookup;
  bool use_pab = true;  // false gives the CAS-only pipeline: no Tier 1, no PAB build
};

struct SessionCounters {
  std::uint64_t rag_calls = 0;
  std::uint64_t tier1_hits = 0;
  std::uint64_t tier2_hits = 0;
  std::uint64_t blocked = 0;
  std::uint64_t delta_total = 0;
  double cost_units = 0.0;
};

enum class ServedBy : std::uint8_t { Tier1Pab, Tier2Cas, Rag };
enum class SafetyVerdict : std::uint8_t { Pass, Blocked };

std::string_view to_string(ServedBy s);

struct TurnDiagnostics {
  std::size_t emergent_count = 0;
  std::size_t frontier_size = 0;
  std::size_t forbidden_productive_frontier = 0;
};

struct TurnOutcome {
  std::optional<ServedBy> served_by;  // empty on blocked turns
  std::string answer;
  Certificate cert;
  SafetyVerdict safety = SafetyVerdict::Pass;
  TurnDiagnostics diagnostics;
  NodeSet delta;
};

/// What the pipeline needs from a corpus turn: the assembled capability set,
/// the corpus-labelled primary capability, and text for the similarity layer.
/// An absent primary (lenient handling of adapter corpora) skips Tier 1 and
/// the CAS write; Tier 2 and the PAB build still run.
struct TurnRequest {
  NodeSet phi;
  std::optional<NodeId> primary;
  std::string query_text;
  std::optional<std::string> gold_answer;
};

struct Stage0Hit {
  ServedBy tier;
  std::string answer;
  Certificate cert;
};

struct RecoveryReport {
  NodeSet recomputed;                // the recomputed session closure
  std::vector<NodeId> invalidated;   // PAB keys removed by the witness scan
  NodeSet ignored;                   // revoked ids that were not in C_t
  double cost_units = 0.0;
  std::optional<bool> gate_safe;     // present when recheck_gate was set
};

/// One logical session: cumulative capability set, incrementally maintained
/// closure, session PAB, and cost counters. Owned by one executor at a time;
/// shares the immutable hypergraph and the reader-concurrent store.
class SessionState {
public:
  SessionState(const Hypergraph& h, ForbiddenSet f, SessionConfig config = {});

  /// Insertion-only delta maintenance: seeds the persistent worklist with
  /// the new capabilities and resumes the arc counters. Returns the sorted
  /// set of nodes that entered the session closure this turn.
  NodeSet advance(const NodeSet& phi);

  /// Tier 1 session PAB, then Tier 2 CAS; a Tier-2 hit merges the entry's
  /// PAB into the session PAB (first writer wins on key collisions).
  std::optional<Stage0Hit> stage0_lookup(NodeId primary, const Embedding& query,
                                         const CasStore& cas);

  /// Full stage 0..5 turn: advance, safety gate, tiered lookup, simulated
  /// RAG on miss, PAB construction and CAS write.
  TurnOutcome process_turn(const TurnRequest& turn, CasStore& cas,
                           const TemplateDb& tdb);

  /// Full closure re-initialization from A_t \ r plus PAB witness scan.
  RecoveryReport revoke(const NodeSet& r, bool recheck_gate);

  /// Replaces the forbidden set and bumps its version; Tier-1 entries
  /// created under the old version stop serving.
  void mutate_forbidden(NodeSet members);

  const NodeSet& capability_set() const { return a_; }
  NodeSet session_closure() const { return engine_.members(); }
  bool closure_contains(NodeId id) const { return engine_.contains(id); }
  bool gate_safe() const;
  const ForbiddenSet& forbidden() const { return f_; }
  const SessionCounters& counters() const { return counters_; }
  const std::vector<NodeSet>& deltas() const { return deltas_; }
  const Hypergraph& graph() const { return *h_; }

  struct PabSlot {
    PabEntry entry;
    std::uint64_t f_version;
  };
  /// Session PAB as a set union: a capability may accumulate entries with
  /// different witnesses (own build plus Tier-2 merges); Tier 1 serves the
  /// first entry whose snapshot and witness still hold.
  const std::map<NodeId, std::vector<PabSlot>>& pab() const { return pab_; }

  Certificate session_certificate() const {
    return Certificate{a_, engine_.firing_log(), h_->version()};
  }

private:
  void merge_pab(const std::vector<PabEntry>& entries);

  const Hypergraph* h_;
  ForbiddenSet f_;
  SessionConfig config_;
  ClosureEngine engine_;
  NodeSet a_;
  std::map<NodeId, std::vector<PabSlot>> pab_;
  std::vector<NodeSet> deltas_;  // cleared when a revocation resets bookkeeping
  SessionCounters counters_;
  std::uint64_t turn_ = 0;
};

/// Number of distinct per-turn closures cl(phi_t): the ontological class
/// count K. Uses exact canonical set comparison, not hashing.
std::size_t ontological_class_count(const Hypergraph& h,
                                    const std::vector<NodeSet>& per_turn_phi);

}  // namespace cas
