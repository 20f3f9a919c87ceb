#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cas/embedding.hpp"
#include "cas/node_set.hpp"

namespace cas {

/// Similarity-only cache. Lookup never consults capabilities; the origin
/// witness is carried purely so replays can audit how often that omission
/// serves answers across capability boundaries.
struct SemanticEntry {
  std::string answer;
  Embedding emb{};
  std::string origin_tenant;
  NodeSet origin_witness;
};

class SemanticCache {
public:
  explicit SemanticCache(double tau = 0.85) : tau_(tau) {}

  std::size_t put(std::string answer, std::string origin_tenant,
                  NodeSet origin_witness);

  struct Hit {
    std::size_t id;
    double similarity;
  };

  /// Highest-similarity entry with similarity strictly above tau; ties by
  /// ascending id.
  std::optional<Hit> lookup(const Embedding& query) const;

  const SemanticEntry& entry(std::size_t id) const { return entries_[id]; }
  std::size_t size() const { return entries_.size(); }
  double tau() const { return tau_; }

private:
  double tau_;
  std::vector<SemanticEntry> entries_;
};

/// The audit-only check behind the unsafe-hit column: a hit is unsafe when
/// its origin witness is not contained in the querying context's closure.
bool unsafe_hit_audit(const SemanticEntry& hit, const NodeSet& c_t);

struct UnsoundDemoReport {
  int semantic_unsafe_hits = 0;
  int cas_unsafe_hits = 0;
  bool semantic_hit = false;      // the cross-tenant query hit the cosine cache
  bool cas_rejected = false;      // the CAS refused that same reuse
  bool cas_self_hit_safe = false; // the tenant's own prior entry is served safely
  std::string transcript;
  std::string json;
};

/// Self-contained multi-tenant fixture: four capabilities, one conjunctive
/// leak arc, two tenants producing the identical answer string under
/// different permissions. The cosine cache serves the cross-tenant answer at
/// similarity 1.0 for any tau < 1; the capability containment check rejects
/// exactly that hit and still serves the tenant's own prior answer.
UnsoundDemoReport unsound_demo(double tau = 0.85);

}  // namespace cas
