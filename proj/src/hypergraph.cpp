#include "cas/hypergraph.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cas/errors.hpp"
#include "json.hpp"

namespace cas {

std::string_view to_string(ArcKind k) {
  switch (k) {
    case ArcKind::TypeA: return "TypeA";
    case ArcKind::TypeB: return "TypeB";
    case ArcKind::TypeC: return "TypeC";
    case ArcKind::Manual: return "Manual";
  }
  return "Manual";
}

ArcKind arc_kind_from_string(std::string_view s) {
  if (s == "TypeA") return ArcKind::TypeA;
  if (s == "TypeB") return ArcKind::TypeB;
  if (s == "TypeC") return ArcKind::TypeC;
  if (s == "Manual") return ArcKind::Manual;
  throw InputError("unknown arc kind: " + std::string(s));
}

std::optional<NodeId> Hypergraph::find_node(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeId Hypergraph::node(std::string_view label) const {
  auto id = find_node(label);
  if (!id) throw InputError("unknown capability: " + std::string(label));
  return *id;
}

NodeSet Hypergraph::resolve(const std::vector<std::string>& labels) const {
  NodeSet out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(node(l));
  return make_set(std::move(out));
}

std::vector<std::string> Hypergraph::labels_of(const NodeSet& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (NodeId id : ids) out.push_back(labels_[id]);
  return out;
}

ForbiddenSet Hypergraph::make_forbidden(const std::vector<std::string>& labels) const {
  return ForbiddenSet{resolve(labels), 0};
}

NodeId HypergraphBuilder::add_node(std::string_view label) {
  if (label.empty()) throw InputError("empty capability label");
  auto it = index_.find(std::string(label));
  if (it != index_.end()) return it->second;
  NodeId id = static_cast<NodeId>(labels_.size());
  labels_.emplace_back(label);
  index_.emplace(labels_.back(), id);
  return id;
}

ArcId HypergraphBuilder::add_arc(const std::vector<std::string>& sources,
                                 const std::vector<std::string>& targets,
                                 double rate, ArcKind kind) {
  NodeSet s, t;
  for (const auto& l : sources) s.push_back(add_node(l));
  for (const auto& l : targets) t.push_back(add_node(l));
  return add_arc_ids(make_set(std::move(s)), make_set(std::move(t)), rate, kind);
}

ArcId HypergraphBuilder::add_arc_ids(NodeSet sources, NodeSet targets,
                                     double rate, ArcKind kind) {
  if (sources.empty()) throw InputError("hyperarc with empty source set");
  if (targets.empty()) throw InputError("hyperarc with empty target set");
  if (!(rate >= 0.0 && rate <= 1.0))
    throw InputError("hyperarc rate outside [0,1]");
  for (NodeId id : sources)
    if (id >= labels_.size()) throw InputError("arc source index out of range");
  for (NodeId id : targets)
    if (id >= labels_.size()) throw InputError("arc target index out of range");
  arcs_.push_back(Hyperarc{std::move(sources), std::move(targets), rate, kind});
  return static_cast<ArcId>(arcs_.size() - 1);
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fingerprint(const std::vector<std::string>& labels,
                          const std::vector<Hyperarc>& arcs) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& l : labels) {
    h = fnv1a(h, l.data(), l.size());
    h = fnv1a(h, "\x1f", 1);
  }
  for (const auto& a : arcs) {
    h = fnv1a(h, a.sources.data(), a.sources.size() * sizeof(NodeId));
    h = fnv1a(h, a.targets.data(), a.targets.size() * sizeof(NodeId));
    double r = a.rate;
    h = fnv1a(h, &r, sizeof r);
    auto k = static_cast<unsigned char>(a.kind);
    h = fnv1a(h, &k, 1);
  }
  return h;
}

}  // namespace

Hypergraph HypergraphBuilder::build() {
  Hypergraph h;
  h.labels_ = std::move(labels_);
  h.index_ = std::move(index_);
  h.arcs_ = std::move(arcs_);
  h.by_source_.assign(h.labels_.size(), {});
  for (ArcId a = 0; a < h.arcs_.size(); ++a)
    for (NodeId s : h.arcs_[a].sources) h.by_source_[s].push_back(a);
  h.version_ = fingerprint(h.labels_, h.arcs_);
  return h;
}

ClosureEngine::ClosureEngine(const Hypergraph& h) : h_(&h) { reset(); }

void ClosureEngine::reset() {
  in_.assign(h_->node_count(), 0);
  remaining_.resize(h_->arc_count());
  for (ArcId a = 0; a < h_->arc_count(); ++a)
    remaining_[a] = static_cast<std::uint32_t>(h_->arc(a).sources.size());
  firings_.clear();
  count_ = 0;
}

NodeSet ClosureEngine::add(const NodeSet& seeds) {
  std::vector<NodeId> queue;
  NodeSet delta;
  for (NodeId s : seeds) {
    if (s >= in_.size()) throw InputError("closure seed index out of range");
    if (!in_[s]) {
      in_[s] = 1;
      ++count_;
      queue.push_back(s);
      delta.push_back(s);
    }
  }
  // FIFO processing keeps the firing order deterministic.
  for (std::size_t head = 0; head < queue.size(); ++head) {
    NodeId v = queue[head];
    for (ArcId a : h_->arcs_from(v)) {
      if (--remaining_[a] == 0) {
        firings_.push_back(a);
        for (NodeId t : h_->arc(a).targets) {
          if (!in_[t]) {
            in_[t] = 1;
            ++count_;
            queue.push_back(t);
            delta.push_back(t);
          }
        }
      }
    }
  }
  return make_set(std::move(delta));
}

NodeSet ClosureEngine::members() const {
  NodeSet out;
  out.reserve(count_);
  for (NodeId i = 0; i < in_.size(); ++i)
    if (in_[i]) out.push_back(i);
  return out;
}

NodeSet closure(const Hypergraph& h, const NodeSet& seeds) {
  ClosureEngine e(h);
  e.add(seeds);
  return e.members();
}

NodeSet closure_unit(const Hypergraph& h, const NodeSet& seeds) {
  // Same worklist restricted to |sources| == 1 arcs.
  std::vector<char> in(h.node_count(), 0);
  std::vector<NodeId> queue;
  for (NodeId s : seeds) {
    if (s >= in.size()) throw InputError("closure seed index out of range");
    if (!in[s]) {
      in[s] = 1;
      queue.push_back(s);
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (ArcId a : h.arcs_from(queue[head])) {
      const Hyperarc& arc = h.arc(a);
      if (arc.sources.size() != 1) continue;
      for (NodeId t : arc.targets) {
        if (!in[t]) {
          in[t] = 1;
          queue.push_back(t);
        }
      }
    }
  }
  NodeSet out;
  for (NodeId i = 0; i < in.size(); ++i)
    if (in[i]) out.push_back(i);
  return out;
}

bool is_safe(const Hypergraph& h, const ForbiddenSet& f, const NodeSet& seeds) {
  return !intersects(closure(h, seeds), f.members);
}

NodeSet emergent(const Hypergraph& h, const NodeSet& seeds) {
  NodeSet cl = closure(h, seeds);
  NodeSet cl1 = closure_unit(h, seeds);
  return set_difference(set_difference(cl, seeds), cl1);
}

std::vector<FrontierRecord> near_miss_frontier(const Hypergraph& h,
                                               const ForbiddenSet& f,
                                               const NodeSet& seeds) {
  NodeSet cl = closure(h, seeds);
  std::vector<FrontierRecord> out;
  for (ArcId a = 0; a < h.arc_count(); ++a) {
    const Hyperarc& arc = h.arc(a);
    // Boundary arcs: exactly one source missing, every other source already
    // derived. A unit arc with its source missing is detached from the
    // closure, not at its boundary.
    if (arc.sources.size() < 2) continue;
    NodeId missing = 0;
    std::size_t uncovered = 0;
    for (NodeId s : arc.sources) {
      if (!set_contains(cl, s)) {
        missing = s;
        if (++uncovered > 1) break;
      }
    }
    if (uncovered == 1) {
      out.push_back(FrontierRecord{missing, a, arc.targets,
                                   intersects(arc.targets, f.members)});
    }
  }
  std::sort(out.begin(), out.end(), [](const FrontierRecord& x, const FrontierRecord& y) {
    if (x.missing != y.missing) return x.missing < y.missing;
    return x.arc < y.arc;
  });
  return out;
}

std::size_t closure_gain(const Hypergraph& h, const NodeSet& a, const NodeSet& b) {
  ClosureEngine e(h);
  e.add(a);
  std::size_t base = e.size();
  e.add(b);
  return e.size() - base;
}

std::vector<std::pair<NodeId, std::size_t>> greedy_topk_gains(
    const Hypergraph& h, const NodeSet& a, const NodeSet& candidates,
    std::size_t k) {
  if (k < 1) throw InputError("greedy_topk_gains requires k >= 1");
  NodeSet cl = closure(h, a);
  for (NodeId c : candidates) {
    if (c >= h.node_count()) throw InputError("candidate index out of range");
    if (set_contains(cl, c))
      throw InputError("candidate already in closure: " + h.label(c));
  }
  std::vector<std::pair<NodeId, std::size_t>> picks;
  NodeSet augmented = a;
  NodeSet remaining = candidates;
  std::size_t rounds = std::min(k, candidates.size());
  for (std::size_t round = 0; round < rounds; ++round) {
    NodeId best = 0;
    std::size_t best_gain = 0;
    bool first = true;
    for (NodeId c : remaining) {  // ascending index: ties go to lowest
      std::size_t g = closure_gain(h, augmented, NodeSet{c});
      if (first || g > best_gain) {
        best = c;
        best_gain = g;
        first = false;
      }
    }
    picks.emplace_back(best, best_gain);
    augmented = set_union(augmented, NodeSet{best});
    remaining = set_erase(std::move(remaining), best);
  }
  return picks;
}

namespace {

// Mask-based saturation for the <= 20 node diagnostics.
std::uint32_t mask_closure(std::uint32_t a,
                           const std::vector<std::pair<std::uint32_t, std::uint32_t>>& arcs) {
  std::uint32_t c = a;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [src, tgt] : arcs) {
      if ((c & src) == src && (c | tgt) != c) {
        c |= tgt;
        changed = true;
      }
    }
  }
  return c;
}

}  // namespace

std::vector<NodeSet> minimal_unsafe_antichain_bruteforce(const Hypergraph& h,
                                                         const ForbiddenSet& f,
                                                         std::size_t max_n) {
  const std::size_t n = h.node_count();
  if (n > max_n) {
    std::ostringstream os;
    os << "antichain enumeration refused: " << n << " nodes exceeds cap of "
       << max_n;
    throw RefusalError(os.str());
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> arcs;
  arcs.reserve(h.arc_count());
  for (const auto& arc : h.arcs()) {
    std::uint32_t s = 0, t = 0;
    for (NodeId x : arc.sources) s |= 1u << x;
    for (NodeId x : arc.targets) t |= 1u << x;
    arcs.emplace_back(s, t);
  }
  std::uint32_t fmask = 0;
  for (NodeId x : f.members) fmask |= 1u << x;

  const std::uint32_t total = n >= 32 ? 0 : (1u << n);
  std::vector<char> unsafe(total, 0);
  for (std::uint32_t m = 0; m < total; ++m)
    unsafe[m] = (mask_closure(m, arcs) & fmask) != 0;

  std::vector<NodeSet> out;
  for (std::uint32_t m = 1; m < total; ++m) {
    if (!unsafe[m]) continue;
    bool minimal = true;
    for (std::uint32_t bits = m; bits; bits &= bits - 1) {
      std::uint32_t without = m & ~(bits & (~bits + 1));
      if (unsafe[without]) {
        minimal = false;
        break;
      }
    }
    if (minimal) {
      NodeSet s;
      for (NodeId i = 0; i < n; ++i)
        if (m & (1u << i)) s.push_back(i);
      out.push_back(std::move(s));
    }
  }
  return out;  // masks ascend, so output order is deterministic
}

DefectReport compositionality_defect(const Hypergraph& h, const ForbiddenSet& f) {
  DefectReport report;
  std::size_t conjunctive = 0;
  for (ArcId a = 0; a < h.arc_count(); ++a) {
    const Hyperarc& arc = h.arc(a);
    if (!intersects(arc.targets, f.members)) continue;
    std::size_t k = arc.sources.size();
    std::uint64_t pairs = (1ULL << (k - 1)) - 1;
    report.per_arc.push_back(DefectEntry{a, k, pairs});
    report.total += pairs;
    if (k >= 2) ++conjunctive;
  }
  report.mean_per_conjunctive =
      conjunctive == 0 ? 0.0 : static_cast<double>(report.total) / static_cast<double>(conjunctive);
  return report;
}

HypergraphFile parse_hypergraph(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("hypergraph parse error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array())
    throw InputError("hypergraph file: missing \"nodes\" array");
  HypergraphBuilder b;
  std::size_t declared = 0;
  for (const auto& n : j["nodes"]) {
    if (!n.is_string()) throw InputError("hypergraph file: node labels must be strings");
    b.add_node(n.get<std::string>());
    ++declared;
  }
  if (j.contains("arcs")) {
    std::size_t i = 0;
    for (const auto& a : j["arcs"]) {
      if (!a.contains("sources") || !a.contains("targets")) {
        throw InputError("hypergraph file: arcs[" + std::to_string(i) +
                         "] needs sources and targets");
      }
      std::vector<std::string> src = a["sources"].get<std::vector<std::string>>();
      std::vector<std::string> tgt = a["targets"].get<std::vector<std::string>>();
      double rate = a.value("rate", 1.0);
      ArcKind kind = arc_kind_from_string(a.value("kind", std::string("Manual")));
      // Endpoints must already be declared nodes.
      for (const auto& l : src)
        if (b.add_node(l) >= declared)
          throw InputError("hypergraph file: arc source not in nodes: " + l);
      for (const auto& l : tgt)
        if (b.add_node(l) >= declared)
          throw InputError("hypergraph file: arc target not in nodes: " + l);
      b.add_arc(src, tgt, rate, kind);
      ++i;
    }
  }
  Hypergraph g = b.build();
  ForbiddenSet f;
  if (j.contains("forbidden"))
    f = g.make_forbidden(j["forbidden"].get<std::vector<std::string>>());
  return HypergraphFile{std::move(g), std::move(f)};
}

HypergraphFile load_hypergraph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open hypergraph file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_hypergraph(ss.str());
}

std::string hypergraph_to_json(const Hypergraph& h, const ForbiddenSet& f) {
  nlohmann::ordered_json j;
  j["nodes"] = nlohmann::json::array();
  for (NodeId i = 0; i < h.node_count(); ++i) j["nodes"].push_back(h.label(i));
  j["arcs"] = nlohmann::json::array();
  for (const auto& arc : h.arcs()) {
    nlohmann::ordered_json a;
    a["sources"] = h.labels_of(arc.sources);
    a["targets"] = h.labels_of(arc.targets);
    a["rate"] = arc.rate;
    a["kind"] = to_string(arc.kind);
    j["arcs"].push_back(std::move(a));
  }
  j["forbidden"] = h.labels_of(f.members);
  return j.dump(2) + "\n";
}

void save_hypergraph(const std::string& path, const Hypergraph& h,
                     const ForbiddenSet& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write hypergraph file: " + path);
  out << hypergraph_to_json(h, f);
}

}  // namespace cas
