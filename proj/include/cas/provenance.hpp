#pragma once

#include <cstdint>

#include "cas/hypergraph.hpp"

namespace cas {

/// Ordered, replayable firing sequence proving membership in a closure.
/// Arc indices refer to one specific hypergraph version; a certificate is
/// invalid against any other version.
struct Certificate {
  NodeSet base;                 // the set the derivation starts from
  std::vector<ArcId> firings;   // chronological; each arc fires at most once
  std::uint64_t graph_version = 0;
};

/// Minimal base-capability set supporting a derivation. Reuse of a stored
/// answer requires members to be contained in the current closure.
struct Witness {
  NodeSet members;
};

/// The complete firing log of the closure run from `a`. Every capability in
/// cl(a) is derivable by replaying it, which is what PAB construction needs.
Certificate full_certificate(const Hypergraph& h, const NodeSet& a);

/// Firing subsequence reaching v, found by backward traversal over the
/// closure run's producer relation. Throws NotDerivable when v is outside
/// cl(a). base stays `a`.
Certificate derive_certificate(const Hypergraph& h, const NodeSet& a, NodeId v);

/// Restriction of an existing certificate to the firings that feed v; O(m).
Certificate sub_cert(const Hypergraph& h, const Certificate& cert, NodeId v);

struct MinimizedDerivation {
  Witness witness;
  Certificate cert;  // cert.base == witness.members; replays to v
};

/// Witness extraction: take the base leaves the sub-certificate for v
/// actually consumes, then greedily drop (ascending index) any leaf without
/// which v stays derivable, and re-derive the certificate from the
/// surviving leaves. No single removal from the result keeps v reachable,
/// and the certificate replays from exactly the witness set.
MinimizedDerivation minimize_derivation(const Hypergraph& h,
                                        const Certificate& cert, NodeId v);

/// v in a returns {v}: an answer the caller already holds is its own witness.
Witness min_witness(const Hypergraph& h, const NodeSet& a,
                    const Certificate& cert, NodeId v);

/// True iff cert.base is contained in cl(a), every firing's sources are
/// covered at firing time when replaying from cert.base, the replay derives
/// v, and the certificate was built against this hypergraph version.
/// Malformed certificates return false rather than throwing.
bool check_certificate(const Hypergraph& h, const NodeSet& a,
                       const Certificate& cert, NodeId v);

}  // namespace cas
