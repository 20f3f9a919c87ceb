#include "cas/session.hpp"

#include <set>

#include "cas/errors.hpp"

namespace cas {

std::string_view to_string(ServedBy s) {
  switch (s) {
    case ServedBy::Tier1Pab: return "tier1_pab";
    case ServedBy::Tier2Cas: return "tier2_cas";
    case ServedBy::Rag: return "rag";
  }
  return "rag";
}

SessionState::SessionState(const Hypergraph& h, ForbiddenSet f, SessionConfig config)
    : h_(&h), f_(std::move(f)), config_(config), engine_(h) {
  for (NodeId m : f_.members)
    if (m >= h.node_count())
      throw InputError("forbidden member index out of range");
}

NodeSet SessionState::advance(const NodeSet& phi) {
  for (NodeId p : phi)
    if (p >= h_->node_count())
      throw InputError("advance: capability index out of range");
  a_ = set_union(a_, phi);
  NodeSet delta = engine_.add(phi);
  deltas_.push_back(delta);
  counters_.delta_total += delta.size();
  return delta;
}

bool SessionState::gate_safe() const {
  for (NodeId m : f_.members)
    if (engine_.contains(m)) return false;
  return true;
}

std::optional<Stage0Hit> SessionState::stage0_lookup(NodeId primary,
                                                     const Embedding& query,
                                                     const CasStore& cas) {
  if (config_.use_pab) {
    auto it = pab_.find(primary);
    if (it != pab_.end()) {
      for (const PabSlot& slot : it->second) {
        if (slot.f_version != f_.version) continue;
        bool contained = true;
        for (NodeId w : slot.entry.witness.members)
          if (!engine_.contains(w)) { contained = false; break; }
        if (contained) {
          ++counters_.tier1_hits;
          counters_.cost_units += config_.cost.tier1_units;
          return Stage0Hit{ServedBy::Tier1Pab, slot.entry.answer, slot.entry.cert};
        }
      }
    }
  }
  NodeSet c_t = engine_.members();
  auto hit = cas_lookup(cas, query, c_t, f_, config_.lookup, h_);
  if (hit) {
    ++counters_.tier2_hits;
    counters_.cost_units += config_.cost.tier2_units;
    if (config_.use_pab) merge_pab(cas.entry(hit->id).pab);
    return Stage0Hit{ServedBy::Tier2Cas, hit->answer, hit->cert};
  }
  return std::nullopt;
}

void SessionState::merge_pab(const std::vector<PabEntry>& entries) {
  for (const auto& e : entries) {
    auto& slots = pab_[e.capability];
    bool duplicate = false;
    for (const auto& slot : slots) {
      if (slot.f_version == f_.version &&
          slot.entry.witness.members == e.witness.members) {
        duplicate = true;  // same witness under the same snapshot adds nothing
        break;
      }
    }
    if (!duplicate) slots.push_back(PabSlot{e, f_.version});
  }
}

TurnOutcome SessionState::process_turn(const TurnRequest& turn, CasStore& cas,
                                       const TemplateDb& tdb) {
  ++turn_;
  TurnOutcome out;
  out.delta = advance(turn.phi);

  // Stage 3 gate. A_t keeps the turn's capabilities either way; blocking is
  // about execution and store writes, not about forgetting what was asked.
  if (!gate_safe()) {
    ++counters_.blocked;
    out.safety = SafetyVerdict::Blocked;
    out.cert.graph_version = h_->version();
    return out;
  }

  NodeSet c_t = engine_.members();
  auto frontier = near_miss_frontier(*h_, f_, a_);
  out.diagnostics.frontier_size = frontier.size();
  for (const auto& r : frontier)
    if (r.forbidden_productive) ++out.diagnostics.forbidden_productive_frontier;
  out.diagnostics.emergent_count = emergent(*h_, a_).size();

  Embedding query = embed(turn.query_text);
  std::optional<Stage0Hit> hit;
  if (turn.primary) {
    hit = stage0_lookup(*turn.primary, query, cas);
  } else {
    // No resolvable primary: Tier 1 is keyed by capability, so only Tier 2
    // applies.
    NodeSet c_now = engine_.members();
    if (auto cas_hit = cas_lookup(cas, query, c_now, f_, config_.lookup, h_)) {
      ++counters_.tier2_hits;
      counters_.cost_units += config_.cost.tier2_units;
      if (config_.use_pab) merge_pab(cas.entry(cas_hit->id).pab);
      hit = Stage0Hit{ServedBy::Tier2Cas, cas_hit->answer, cas_hit->cert};
    }
  }
  if (hit) {
    out.served_by = hit->tier;
    out.answer = std::move(hit->answer);
    out.cert = std::move(hit->cert);
    return out;
  }

  // Stage 4 (simulated RAG) and stage 5 (PAB + CAS write).
  ++counters_.rag_calls;
  counters_.cost_units += config_.cost.rag_units;
  out.served_by = ServedBy::Rag;

  const std::string* label = turn.primary ? &h_->label(*turn.primary) : nullptr;
  if (label && tdb.has(*label)) {
    out.answer = render_template(tdb, *label, closure_facts(*h_, c_t)).text;
  } else if (turn.gold_answer) {
    out.answer = *turn.gold_answer;
  } else {
    out.answer = "RAG(" + (label ? *label : std::string("unknown")) + ")";
  }

  Certificate full = session_certificate();
  std::vector<PabEntry> pab;
  if (config_.use_pab) {
    pab = build_pab(*h_, a_, c_t, f_, full, tdb);
    merge_pab(pab);
  }

  if (turn.primary && engine_.contains(*turn.primary)) {
    MinimizedDerivation d = minimize_derivation(*h_, full, *turn.primary);
    out.cert = d.cert;
    CasEntry entry;
    entry.answer = out.answer;
    entry.witness = std::move(d.witness);
    entry.pab = std::move(pab);
    entry.f_snap = f_;
    entry.cert = out.cert;
    entry.t_store = turn_;
    cas.put(std::move(entry));
  } else {
    // The corpus labelled a primary capability the closure cannot certify;
    // the answer is served but nothing uncertifiable is stored.
    out.cert.graph_version = h_->version();
  }
  return out;
}

RecoveryReport SessionState::revoke(const NodeSet& r, bool recheck_gate) {
  RecoveryReport report;
  NodeSet c_before = engine_.members();
  report.ignored = set_difference(r, c_before);

  a_ = set_difference(a_, r);
  engine_.reset();
  engine_.add(a_);
  deltas_.clear();
  report.recomputed = engine_.members();

  std::size_t scanned = 0;
  for (auto it = pab_.begin(); it != pab_.end();) {
    bool removed_here = false;
    auto& slots = it->second;
    for (auto sit = slots.begin(); sit != slots.end();) {
      ++scanned;
      if (intersects(sit->entry.witness.members, r)) {
        removed_here = true;
        sit = slots.erase(sit);
      } else {
        ++sit;
      }
    }
    if (removed_here) report.invalidated.push_back(it->first);
    if (slots.empty()) it = pab_.erase(it);
    else ++it;
  }
  report.cost_units =
      static_cast<double>(report.recomputed.size()) + static_cast<double>(scanned);
  if (recheck_gate) report.gate_safe = gate_safe();
  return report;
}

void SessionState::mutate_forbidden(NodeSet members) {
  for (NodeId m : members)
    if (m >= h_->node_count())
      throw InputError("forbidden member index out of range");
  f_.members = std::move(members);
  ++f_.version;
}

std::size_t ontological_class_count(const Hypergraph& h,
                                    const std::vector<NodeSet>& per_turn_phi) {
  std::set<NodeSet> classes;
  for (const auto& phi : per_turn_phi) classes.insert(closure(h, phi));
  return classes.size();
}

}  // namespace cas
