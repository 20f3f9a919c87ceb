#pragma once

// Independent oracles for property tests. These deliberately avoid the
// library's worklist engine: the closure oracle saturates arcs by repeated
// full passes, and the embedding oracle re-implements the hashing scheme
// from its written definition.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cas/hypergraph.hpp"
#include "cas/rng.hpp"

namespace oracles {

inline cas::NodeSet closure_bruteforce(const cas::Hypergraph& h, const cas::NodeSet& a) {
  std::set<cas::NodeId> c(a.begin(), a.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& arc : h.arcs()) {
      bool ready = true;
      for (cas::NodeId s : arc.sources)
        if (c.count(s) == 0) { ready = false; break; }
      if (!ready) continue;
      for (cas::NodeId t : arc.targets)
        if (c.insert(t).second) changed = true;
    }
  }
  return cas::NodeSet(c.begin(), c.end());
}

struct RandomGraphSpec {
  std::size_t max_nodes = 12;
  std::size_t max_arcs = 20;
  std::size_t max_fan_in = 4;
  std::size_t max_fan_out = 3;
};

inline cas::Hypergraph random_graph(cas::Rng& rng, const RandomGraphSpec& spec = {}) {
  std::size_t n = 2 + rng.below(spec.max_nodes - 1);
  cas::HypergraphBuilder b;
  for (std::size_t i = 0; i < n; ++i) b.add_node("n" + std::to_string(i));
  std::size_t m = rng.below(spec.max_arcs + 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t fan_in = 1 + rng.below(std::min(spec.max_fan_in, n));
    std::size_t fan_out = 1 + rng.below(std::min(spec.max_fan_out, n));
    cas::NodeSet sources, targets;
    for (std::size_t s = 0; s < fan_in; ++s)
      sources.push_back(static_cast<cas::NodeId>(rng.below(n)));
    for (std::size_t t = 0; t < fan_out; ++t)
      targets.push_back(static_cast<cas::NodeId>(rng.below(n)));
    b.add_arc_ids(cas::make_set(std::move(sources)), cas::make_set(std::move(targets)),
                  1.0, cas::ArcKind::Manual);
  }
  return b.build();
}

inline cas::NodeSet random_subset(cas::Rng& rng, std::size_t n, double density = 0.35) {
  cas::NodeSet out;
  for (std::size_t i = 0; i < n; ++i)
    if (rng.bernoulli(density)) out.push_back(static_cast<cas::NodeId>(i));
  return out;
}

// Reference re-implementation of the signed feature-hashing embedding.
inline std::vector<double> embed_reference(const std::string& text) {
  std::vector<double> v(64, 0.0);
  std::size_t i = 0;
  bool any = false;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    std::string token;
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    if (token.empty()) continue;
    std::uint64_t hsh = 1469598103934665603ULL;
    for (char ch : token) {
      hsh ^= static_cast<unsigned char>(ch);
      hsh *= 1099511628211ULL;
    }
    v[hsh % 64] += ((hsh >> 32) & 1u) ? 1.0 : -1.0;
    any = true;
  }
  if (!any) return v;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) return v;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace oracles
