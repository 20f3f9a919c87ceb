#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cas/hypergraph.hpp"
#include "cas/ontology.hpp"

namespace cas {

/// One dialogue turn. Belief states are cumulative slot-value maps; outcomes
/// are capability tokens observed at this turn (retrieval results, bookings).
/// query_text is the utterance surface the similarity layer embeds; when
/// absent, the gold answer text stands in for it.
struct Turn {
  std::uint32_t turn_id = 0;
  std::map<std::string, std::map<std::string, std::string>> belief_state;
  std::vector<std::string> outcomes;
  std::string primary_capability;
  std::optional<std::string> tenant;
  std::optional<std::string> answer_text;
  std::optional<std::string> query_text;
};

struct DialogueSession {
  std::string session_id;
  std::vector<Turn> turns;
};

enum class CorpusKind : std::uint8_t { Native, Multiwoz, Synthetic };

struct CorpusProvenance {
  CorpusKind kind = CorpusKind::Native;
  std::uint64_t seed = 0;
  std::string params;  // free-form summary for synthetic corpora
};

struct Corpus {
  std::vector<DialogueSession> sessions;
  std::string ontology_ref;
  CorpusProvenance provenance;
};

/// Capability-assembly granularity. Extracted hypergraphs are slot-level;
/// hand-built and planted graphs may carry value-level nodes.
enum class Projection : std::uint8_t { SlotValue, SlotLevel };

/// Capability labels for a turn: slot-value (or slot) tokens from the belief
/// state plus the turn's outcome tokens. Sorted, duplicate-free.
std::vector<std::string> phi_labels(const Turn& turn, Projection projection);

/// phi resolved against a hypergraph; unresolvable labels raise InputError
/// naming the label.
NodeSet resolve_phi(const Hypergraph& h, const Turn& turn, Projection projection);

/// Lowercases and collapses non-alphanumeric runs to single dashes, so
/// free-text slot values become stable capability label segments.
std::string normalize_token(const std::string& raw);

Corpus load_corpus(const std::string& path);
Corpus parse_corpus(const std::string& json_text);
std::string corpus_to_json(const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);

/// ---- Synthetic corpora ----------------------------------------------------

struct SynthDomain {
  std::string name;
  std::vector<std::string> query_slots;    // sources of the retrieval arc
  std::vector<std::string> booking_slots;  // extra booking preconditions; empty = not bookable
  std::vector<std::string> followup_caps;  // info capabilities derivable from the anchor
  double retrieval_rate = 1.0;             // true outcome rate for event-emitting corpora
  double booking_rate = 1.0;
  std::size_t values_per_slot = 6;
};

struct SynthParams {
  std::size_t n_sessions = 100;
  std::vector<SynthDomain> domains;
  /// Weights for K = 1..k_weights.size() ontological classes per session.
  std::vector<double> k_weights = {0.612, 0.287, 0.081, 0.020};
  std::vector<std::string> tenants = {"t0"};
  std::size_t followups_per_class = 4;
  /// Fraction of follow-up turns that repeat an earlier ask verbatim.
  double repeat_rate = 0.0;
  /// Probability a class segment's answers are replaced by a shared
  /// canonical string, planting cross-class duplicate answers.
  double duplicate_answer_rate = 0.0;
  /// Event-emitting mode for extraction corpora: outcome tokens appear in
  /// the turn stream per the domains' true rates, within `horizon` turns.
  bool emit_outcome_events = false;
  std::size_t horizon = 3;
  /// Event-emitting mode only: also drive the booking phase.
  bool include_booking = false;
  /// Fraction of sessions that assemble the forbidden pattern (the planted
  /// graph's risky arc) to exercise the safety gate.
  double forbidden_session_rate = 0.0;
};

/// Deterministic per seed. Belief values are sampled per session from small
/// per-slot pools, so distinct sessions usually carry distinct witnesses.
Corpus synth_corpus(const SynthParams& params, std::uint64_t seed);

/// Four travel-assistant domains with the reference fan-in profile (the
/// booking arc with five preconditions included) and the reference K
/// weights.
SynthParams default_synth_params();

/// Ground-truth world for a synthetic corpus: value-level capability nodes
/// with projection arcs onto slot tokens, the planted retrieval/booking
/// arcs, unit arcs to follow-up capabilities, and one forbidden pattern.
/// Template texts match the generator's canonical answers, so rendering one
/// with the session's closure facts reproduces the gold answer byte for byte.
struct SynthWorld {
  Corpus corpus;
  Hypergraph graph;
  ForbiddenSet forbidden;
  std::map<std::string, std::string> templates;
};

SynthWorld synth_world(const SynthParams& params, std::uint64_t seed);

/// Ontology describing the synthetic domains (drives extraction runs over
/// synthetic corpora).
Ontology synth_ontology(const SynthParams& params);

/// Appendix-style slot omission: independently per (session, slot), with
/// probability r the slot disappears from every belief state in the session.
/// The input corpus is untouched.
Corpus inject_slot_omission(const Corpus& corpus, double r, std::uint64_t seed);

}  // namespace cas
