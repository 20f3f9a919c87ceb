#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cas/embedding.hpp"
#include "cas/provenance.hpp"

namespace cas {

/// Answer templates keyed by capability label, with {slot} placeholders
/// filled from closure facts at render time.
class TemplateDb {
public:
  TemplateDb() = default;
  explicit TemplateDb(std::map<std::string, std::string> templates)
      : templates_(std::move(templates)) {}

  static TemplateDb load(const std::string& path);
  void save(const std::string& path) const;

  void set(const std::string& capability, const std::string& text) {
    templates_[capability] = text;
  }
  bool has(const std::string& capability) const {
    return templates_.count(capability) != 0;
  }
  const std::string* find(const std::string& capability) const;
  std::size_t size() const { return templates_.size(); }
  const std::map<std::string, std::string>& entries() const { return templates_; }

  /// Deterministically retains floor(p * size) templates: keys are taken in
  /// sorted order, shuffled with the seeded generator, and the first k kept.
  TemplateDb with_coverage(double p, std::uint64_t seed) const;

private:
  std::map<std::string, std::string> templates_;
};

struct RenderResult {
  std::string text;
  std::vector<std::string> unresolved;  // slots rendered as {slot:unknown}
};

/// Throws MissingTemplate when the capability has no template. Unresolved
/// placeholders do not abort; they are reported back so callers can
/// downgrade the entry.
RenderResult render_template(const TemplateDb& tdb, const std::string& capability,
                             const std::map<std::string, std::string>& facts);

/// Facts visible to templates at a closure event: every member label maps to
/// "yes", and labels shaped like <prefix>-<tail> additionally expose
/// facts[prefix] = tail so value-bearing capabilities (hotel-area-north) fill
/// {hotel-area}. Exact member labels always win over split-derived keys.
std::map<std::string, std::string> closure_facts(const Hypergraph& h,
                                                 const NodeSet& members);

/// Pre-certified answer for one derivable follow-up capability.
struct PabEntry {
  NodeId capability = 0;
  std::string answer;
  Witness witness;
  Certificate cert;  // base == witness members; replays to capability
  std::vector<std::string> unresolved;  // non-empty marks a degraded render
};

struct CasEntry {
  std::string answer;
  Witness witness;
  std::vector<PabEntry> pab;
  ForbiddenSet f_snap;
  Certificate cert;
  std::uint64_t t_store = 0;
  Embedding emb{};  // always recomputed from answer on insert
};

/// Append-only store. Lookups never mutate; concurrent readers see a
/// consistent prefix.
class CasStore {
public:
  std::uint64_t put(CasEntry entry);  // returns the monotone id
  std::size_t size() const { return entries_.size(); }
  const CasEntry& entry(std::size_t id) const { return entries_[id]; }
  const std::vector<CasEntry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  /// Ids ranked by descending cosine similarity, ties by ascending id,
  /// truncated to `top`. Exact scan.
  std::vector<std::size_t> approx_filter(const Embedding& query,
                                         std::size_t top) const;

private:
  std::vector<CasEntry> entries_;
};

struct LookupPolicy {
  /// Candidacy floor: entries below this cosine similarity are not
  /// considered the same question. Safety never depends on it; it gates
  /// relevance only.
  double sim_floor = 0.85;
  /// Off by default: strict F-snapshot equality per the lookup rule. The
  /// refined mode accepts entries whose witness closure misses every
  /// forbidden capability added since the snapshot.
  bool refined_invalidation = false;
};

struct CasHit {
  std::size_t id;
  std::string answer;
  Certificate cert;
};

/// Scans similarity-ranked candidates and returns the first whose witness is
/// contained in c_t and whose forbidden-set snapshot matches f. `h` is only
/// consulted in refined-invalidation mode.
std::optional<CasHit> cas_lookup(const CasStore& store, const Embedding& query,
                                 const NodeSet& c_t, const ForbiddenSet& f,
                                 const LookupPolicy& policy = {},
                                 const Hypergraph* h = nullptr);

/// Lines 3-7 of the construction loop: one entry per derivable, permitted,
/// template-covered capability. Refuses unsafe closures outright; the
/// pipeline gate must hold before any PAB is materialized.
std::vector<PabEntry> build_pab(const Hypergraph& h, const NodeSet& a_t,
                                const NodeSet& cl_at, const ForbiddenSet& f,
                                const Certificate& cert_main,
                                const TemplateDb& tdb);

/// JSON-lines dump/restore for golden tests. Embeddings are derived fields
/// and are recomputed on restore.
std::string cas_to_jsonl(const CasStore& store, const Hypergraph& h);
CasStore cas_from_jsonl(const std::string& text, const Hypergraph& h);
void save_cas(const std::string& path, const CasStore& store, const Hypergraph& h);
CasStore load_cas(const std::string& path, const Hypergraph& h);

}  // namespace cas
