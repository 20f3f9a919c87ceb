#pragma once

#include "cas/hypergraph.hpp"

namespace fixtures {

// arcs ({a,b}->{c}), ({c}->{d})
inline cas::Hypergraph toy() {
  cas::HypergraphBuilder b;
  b.add_node("a");
  b.add_node("b");
  b.add_node("c");
  b.add_node("d");
  b.add_arc({"a", "b"}, {"c"});
  b.add_arc({"c"}, {"d"});
  return b.build();
}

// the multi-tenant leak construction
inline cas::Hypergraph leak() {
  cas::HypergraphBuilder b;
  b.add_node("read_PII");
  b.add_node("query_db");
  b.add_node("gen");
  b.add_node("f_leak");
  b.add_arc({"read_PII", "gen"}, {"f_leak"});
  return b.build();
}

// fan-in-5 booking arc: cand-retrieved + name/day/people/stay -> hotel-booked
inline cas::Hypergraph hotel() {
  cas::HypergraphBuilder b;
  b.add_node("cand-retrieved");
  b.add_node("name");
  b.add_node("day");
  b.add_node("people");
  b.add_node("stay");
  b.add_node("hotel-booked");
  b.add_arc({"cand-retrieved", "name", "day", "people", "stay"}, {"hotel-booked"});
  return b.build();
}

}  // namespace fixtures
