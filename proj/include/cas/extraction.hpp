#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cas/corpus.hpp"
#include "cas/hypergraph.hpp"
#include "cas/ontology.hpp"

namespace cas {

struct PairStats {
  std::uint64_t n_s = 0;   // sessions with a qualifying turn
  std::uint64_t n_sv = 0;  // of those, outcome within the horizon
  ArcKind kind = ArcKind::TypeA;
  double rate() const {
    return n_s == 0 ? 0.0 : static_cast<double>(n_sv) / static_cast<double>(n_s);
  }
};

/// Per-(source set, outcome) session counts. Keys are sorted capability
/// label lists; map ordering keeps every downstream walk deterministic.
struct CooccurrenceStats {
  using Key = std::pair<std::vector<std::string>, std::string>;
  std::map<Key, PairStats> counts;

  const PairStats* find(const std::vector<std::string>& sources,
                        const std::string& target) const;
};

/// Session-level counting: a session counts toward n_S at its first turn
/// with S covered by the belief/outcome stream, and toward n_{S,v} when v
/// appears in some turn's outcomes within `horizon` turns of that point.
/// Candidate source sets are the per-domain informable-slot subsets of size
/// <= max_subset, the booking precondition sets, and the ontology's
/// cross-domain seed patterns. Parallelized per session.
CooccurrenceStats collect_stats(const Corpus& corpus, const Ontology& ontology,
                                std::size_t horizon, std::size_t max_subset = 5);

struct ExtractCandidate {
  std::vector<std::string> sources;  // sorted labels
  std::string target;
  double rate = 0.0;
  std::uint64_t n_s = 0;
  ArcKind kind = ArcKind::TypeA;
};

/// Removes (S,v) when a retained (S',v) with S' strictly inside S has rate
/// at least rate(S). Incomparable sets are kept regardless of rates. Output
/// order: target, then source-set size, then lexicographic sources. All
/// input rates must already clear theta.
std::vector<ExtractCandidate> minimal_cover(std::vector<ExtractCandidate> arcs,
                                            double theta);

struct ExtractionOptions {
  /// Candidates observed in fewer sessions than this are dropped before the
  /// rate filter; cross-domain seed patterns the corpus never exhibits fall
  /// back to their seeded rate and skip the floor.
  std::uint64_t support_floor = 30;
};

/// Retains candidates with empirical rate >= theta, applies minimal_cover,
/// and assembles the slot-level hypergraph (slot tokens, outcome nodes,
/// cross-domain link nodes). Node order is lexicographic, so saves are
/// byte-stable.
Hypergraph extract_hypergraph(const CooccurrenceStats& stats,
                              const Ontology& ontology, double theta,
                              const ExtractionOptions& options = {});

/// exp(-2 * n_S * epsilon^2), the one-sided false-retention bound.
double hoeffding_bound(std::uint64_t n_s, double epsilon);

struct SoundnessRow {
  ArcId arc = 0;
  std::vector<std::string> sources;
  std::string target;
  double rate = 0.0;
  std::uint64_t n_s = 0;
  double bound = 1.0;
  bool flagged = false;  // n_s below the configured floor
};

struct SoundnessReport {
  std::vector<SoundnessRow> rows;
  double max_bound = 0.0;
  std::size_t flagged_count = 0;
};

SoundnessReport soundness_report(const Hypergraph& h,
                                 const CooccurrenceStats& stats, double theta,
                                 double epsilon, std::uint64_t floor = 100);

/// Stats dump for reproducibility (sorted JSON object).
std::string stats_to_json(const CooccurrenceStats& stats);
void save_stats(const std::string& path, const CooccurrenceStats& stats);

}  // namespace cas
