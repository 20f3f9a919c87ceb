#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cas/node_set.hpp"

namespace cas {

enum class ArcKind : std::uint8_t { TypeA, TypeB, TypeC, Manual };

std::string_view to_string(ArcKind k);
ArcKind arc_kind_from_string(std::string_view s);

/// Conjunctive rule: once every source is present, all targets are derived.
/// The observed derivation rate is carried for extraction reporting; closure
/// semantics are possibilistic and never look at it.
struct Hyperarc {
  NodeSet sources;
  NodeSet targets;
  double rate = 1.0;
  ArcKind kind = ArcKind::Manual;
};

/// Capabilities that must never enter a closure. The version counter is
/// bumped by whoever mutates the set mid-run; stored snapshots compare
/// against it under the strict snapshot policy.
struct ForbiddenSet {
  NodeSet members;
  std::uint64_t version = 0;
};

/// Immutable capability hypergraph. Node labels are interned to dense
/// indices 0..n-1; arcs reference indices only. The per-node index maps a
/// node to every arc listing it as a source. A structural fingerprint
/// identifies the graph version certificates were derived against.
class Hypergraph {
public:
  Hypergraph() = default;  // empty graph; populate through HypergraphBuilder

  std::size_t node_count() const { return labels_.size(); }
  std::size_t arc_count() const { return arcs_.size(); }

  const std::string& label(NodeId id) const { return labels_[id]; }
  std::optional<NodeId> find_node(std::string_view label) const;
  NodeId node(std::string_view label) const;  // throws InputError when absent

  const std::vector<Hyperarc>& arcs() const { return arcs_; }
  const Hyperarc& arc(ArcId id) const { return arcs_[id]; }
  const std::vector<ArcId>& arcs_from(NodeId id) const { return by_source_[id]; }

  std::uint64_t version() const { return version_; }

  /// Resolve labels to a sorted id set; unknown labels raise InputError
  /// naming the label.
  NodeSet resolve(const std::vector<std::string>& labels) const;
  std::vector<std::string> labels_of(const NodeSet& ids) const;

  ForbiddenSet make_forbidden(const std::vector<std::string>& labels) const;

private:
  friend class HypergraphBuilder;

  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Hyperarc> arcs_;
  std::vector<std::vector<ArcId>> by_source_;
  std::uint64_t version_ = 0;
};

class HypergraphBuilder {
public:
  NodeId add_node(std::string_view label);  // idempotent per label
  ArcId add_arc(const std::vector<std::string>& sources,
                const std::vector<std::string>& targets, double rate = 1.0,
                ArcKind kind = ArcKind::Manual);
  ArcId add_arc_ids(NodeSet sources, NodeSet targets, double rate = 1.0,
                    ArcKind kind = ArcKind::Manual);
  Hypergraph build();

private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Hyperarc> arcs_;
};

/// Worklist fixed point with per-arc unsatisfied-source counters; O(n+mk)
/// and every arc fires at most once. Counters persist across add() calls so
/// a session can grow its closure incrementally: each call seeds only the
/// new nodes and resumes, returning the sorted delta of nodes that entered.
/// The firing log accumulates in chronological order and is replay-valid
/// from the union of all seeds.
class ClosureEngine {
public:
  explicit ClosureEngine(const Hypergraph& h);

  NodeSet add(const NodeSet& seeds);
  bool contains(NodeId id) const { return in_[id] != 0; }
  std::size_t size() const { return count_; }
  NodeSet members() const;
  const std::vector<ArcId>& firing_log() const { return firings_; }
  void reset();

  const Hypergraph& graph() const { return *h_; }

private:
  const Hypergraph* h_;
  std::vector<char> in_;
  std::vector<std::uint32_t> remaining_;
  std::vector<ArcId> firings_;
  std::size_t count_ = 0;
};

NodeSet closure(const Hypergraph& h, const NodeSet& seeds);
NodeSet closure_unit(const Hypergraph& h, const NodeSet& seeds);

bool is_safe(const Hypergraph& h, const ForbiddenSet& f, const NodeSet& seeds);

/// cl(A) \ A \ cl1(A): members reachable only through conjunctive arcs.
NodeSet emergent(const Hypergraph& h, const NodeSet& seeds);

/// One record per (arc, missing node) pair at the closure boundary: arcs
/// with exactly one source missing and every other source already derived.
/// The underlying definition leaves open whether the frontier element is the
/// missing precondition or the unlocked target, so records carry both; arcs
/// whose targets touch F are flagged rather than dropped.
struct FrontierRecord {
  NodeId missing;
  ArcId arc;
  NodeSet unlocked;
  bool forbidden_productive;
};

std::vector<FrontierRecord> near_miss_frontier(const Hypergraph& h,
                                               const ForbiddenSet& f,
                                               const NodeSet& seeds);

std::size_t closure_gain(const Hypergraph& h, const NodeSet& a, const NodeSet& b);

/// Standard greedy ranking of single candidates by marginal closure gain,
/// ties by lowest node index. Asking for more rounds than candidates ranks
/// them all.
std::vector<std::pair<NodeId, std::size_t>> greedy_topk_gains(
    const Hypergraph& h, const NodeSet& a, const NodeSet& candidates,
    std::size_t k);

/// Subset enumeration diagnostic: all minimal A with cl(A) hitting F.
/// Refuses graphs above max_n nodes.
std::vector<NodeSet> minimal_unsafe_antichain_bruteforce(
    const Hypergraph& h, const ForbiddenSet& f, std::size_t max_n = 20);

struct DefectEntry {
  ArcId arc;
  std::size_t fan_in;
  std::uint64_t forced_pairs;  // 2^(k-1) - 1
};

struct DefectReport {
  std::vector<DefectEntry> per_arc;  // one entry per forbidden-productive arc
  std::uint64_t total = 0;
  double mean_per_conjunctive = 0.0;  // over fan-in >= 2 entries
};

DefectReport compositionality_defect(const Hypergraph& h, const ForbiddenSet& f);

/// File format: {"nodes":[...], "arcs":[{"sources","targets","rate","kind"}],
/// "forbidden":[...]}. Saving emits nodes in index order and endpoint lists
/// in ascending index order, so load/save round-trips are byte-stable for
/// files in sorted node order.
struct HypergraphFile {
  Hypergraph graph;
  ForbiddenSet forbidden;
};

HypergraphFile load_hypergraph(const std::string& path);
HypergraphFile parse_hypergraph(const std::string& json_text);
std::string hypergraph_to_json(const Hypergraph& h, const ForbiddenSet& f);
void save_hypergraph(const std::string& path, const Hypergraph& h,
                     const ForbiddenSet& f);

}  // namespace cas
