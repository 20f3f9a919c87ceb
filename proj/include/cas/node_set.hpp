#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace cas {

using NodeId = std::uint32_t;
using ArcId = std::uint32_t;

/// Capability sets are sorted, duplicate-free vectors of dense node indices.
/// Ascending index order is the tie-break rule everywhere sets are ranked
/// or serialized.
using NodeSet = std::vector<NodeId>;

inline NodeSet make_set(std::vector<NodeId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline bool set_contains(const NodeSet& s, NodeId x) {
  return std::binary_search(s.begin(), s.end(), x);
}

inline bool is_subset(const NodeSet& a, const NodeSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool intersects(const NodeSet& a, const NodeSet& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) ++ia;
    else if (*ib < *ia) ++ib;
    else return true;
  }
  return false;
}

inline NodeSet set_union(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline NodeSet set_intersection(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline void set_insert(NodeSet& s, NodeId x) {
  auto it = std::lower_bound(s.begin(), s.end(), x);
  if (it == s.end() || *it != x) s.insert(it, x);
}

inline NodeSet set_erase(NodeSet s, NodeId x) {
  auto it = std::lower_bound(s.begin(), s.end(), x);
  if (it != s.end() && *it == x) s.erase(it);
  return s;
}

}  // namespace cas
