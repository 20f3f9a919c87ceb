#include "cas/provenance.hpp"

#include <limits>

#include "cas/errors.hpp"

namespace cas {

namespace {

constexpr std::uint32_t kNoProducer = std::numeric_limits<std::uint32_t>::max();

// Replays cert firings from cert.base and records, for each node, the index
// of the firing that first produced it. Returns false if some firing's
// sources are not covered at firing time (malformed certificate).
bool replay_producers(const Hypergraph& h, const NodeSet& base,
                      const std::vector<ArcId>& firings,
                      std::vector<char>& covered,
                      std::vector<std::uint32_t>& producer) {
  covered.assign(h.node_count(), 0);
  producer.assign(h.node_count(), kNoProducer);
  for (NodeId b : base) {
    if (b >= h.node_count()) return false;
    covered[b] = 1;
  }
  for (std::uint32_t i = 0; i < firings.size(); ++i) {
    if (firings[i] >= h.arc_count()) return false;
    const Hyperarc& arc = h.arc(firings[i]);
    for (NodeId s : arc.sources)
      if (!covered[s]) return false;
    for (NodeId t : arc.targets) {
      if (!covered[t]) {
        covered[t] = 1;
        producer[t] = i;
      }
    }
  }
  return true;
}

// Backward traversal from v over the producer relation; returns the kept
// firing positions in ascending (chronological) order.
std::vector<std::uint32_t> producer_tree(const Hypergraph& h,
                                         const std::vector<ArcId>& firings,
                                         const std::vector<std::uint32_t>& producer,
                                         NodeId v) {
  std::vector<char> keep(firings.size(), 0);
  std::vector<NodeId> stack{v};
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    std::uint32_t p = producer[u];
    if (p == kNoProducer || keep[p]) continue;
    keep[p] = 1;
    for (NodeId s : h.arc(firings[p]).sources) stack.push_back(s);
  }
  std::vector<std::uint32_t> kept;
  for (std::uint32_t i = 0; i < firings.size(); ++i)
    if (keep[i]) kept.push_back(i);
  return kept;
}

NodeSet consumed_leaves(const Hypergraph& h, const NodeSet& base,
                        const std::vector<ArcId>& firings) {
  std::vector<char> produced(h.node_count(), 0);
  NodeSet leaves;
  for (ArcId a : firings) {
    for (NodeId s : h.arc(a).sources)
      if (!produced[s]) leaves.push_back(s);  // s must be a base member
    for (NodeId t : h.arc(a).targets) produced[t] = 1;
  }
  leaves = make_set(std::move(leaves));
  return set_intersection(leaves, base);
}

}  // namespace

Certificate full_certificate(const Hypergraph& h, const NodeSet& a) {
  ClosureEngine e(h);
  e.add(a);
  return Certificate{a, e.firing_log(), h.version()};
}

Certificate sub_cert(const Hypergraph& h, const Certificate& cert, NodeId v) {
  if (v >= h.node_count()) throw NotDerivable("capability index out of range");
  std::vector<char> covered;
  std::vector<std::uint32_t> producer;
  if (!replay_producers(h, cert.base, cert.firings, covered, producer))
    throw NotDerivable("certificate does not replay");
  if (!covered[v])
    throw NotDerivable("not derivable from certificate: " + h.label(v));
  if (set_contains(cert.base, v))
    return Certificate{cert.base, {}, cert.graph_version};
  std::vector<ArcId> kept;
  for (std::uint32_t i : producer_tree(h, cert.firings, producer, v))
    kept.push_back(cert.firings[i]);
  return Certificate{cert.base, std::move(kept), cert.graph_version};
}

Certificate derive_certificate(const Hypergraph& h, const NodeSet& a, NodeId v) {
  return sub_cert(h, full_certificate(h, a), v);
}

MinimizedDerivation minimize_derivation(const Hypergraph& h,
                                        const Certificate& cert, NodeId v) {
  if (set_contains(cert.base, v)) {
    return MinimizedDerivation{Witness{NodeSet{v}},
                               Certificate{NodeSet{v}, {}, cert.graph_version}};
  }
  Certificate path = sub_cert(h, cert, v);
  NodeSet witness = consumed_leaves(h, path.base, path.firings);
  // Greedy 1-minimization: a leaf goes when v stays derivable without it
  // (any derivation, not just the extracted one). One ascending pass leaves
  // a witness where no single removal keeps v reachable.
  NodeSet snapshot = witness;
  for (NodeId x : snapshot) {
    NodeSet without = set_erase(witness, x);
    if (set_contains(closure(h, without), v)) witness = std::move(without);
  }
  // Re-derive the stored certificate from the witness itself, so the
  // certificate replays from exactly the set the containment check tests.
  Certificate rebuilt = sub_cert(h, full_certificate(h, witness), v);
  rebuilt.graph_version = cert.graph_version;
  return MinimizedDerivation{Witness{std::move(witness)}, std::move(rebuilt)};
}

Witness min_witness(const Hypergraph& h, const NodeSet& a,
                    const Certificate& cert, NodeId v) {
  if (set_contains(a, v)) return Witness{NodeSet{v}};
  return minimize_derivation(h, cert, v).witness;
}

bool check_certificate(const Hypergraph& h, const NodeSet& a,
                       const Certificate& cert, NodeId v) {
  if (cert.graph_version != h.version()) return false;
  if (v >= h.node_count()) return false;
  for (NodeId b : cert.base)
    if (b >= h.node_count()) return false;
  NodeSet cl = closure(h, a);
  if (!is_subset(cert.base, cl)) return false;
  std::vector<char> covered;
  std::vector<std::uint32_t> producer;
  if (!replay_producers(h, cert.base, cert.firings, covered, producer))
    return false;
  return covered[v] != 0;
}

}  // namespace cas
