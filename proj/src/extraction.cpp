#include "cas/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cas/errors.hpp"
#include "cas/parallel.hpp"
#include "json.hpp"

namespace cas {

const PairStats* CooccurrenceStats::find(const std::vector<std::string>& sources,
                                         const std::string& target) const {
  std::vector<std::string> key = sources;
  std::sort(key.begin(), key.end());
  auto it = counts.find({key, target});
  return it == counts.end() ? nullptr : &it->second;
}

namespace {

struct SlotReq {
  std::string domain;
  std::string slot;
};

// One candidate (S, v): slot requirements are tested against the cumulative
// belief state, token requirements against the cumulative outcome stream.
struct CandidateSpec {
  std::vector<std::string> sources;  // sorted labels
  std::string target;
  std::vector<SlotReq> slot_reqs;
  std::vector<std::string> token_reqs;
  ArcKind kind = ArcKind::TypeA;
};

// Splits a capability label into (domain, slot) when it names an informable
// slot of the ontology; otherwise it is treated as a stream token.
bool parse_slot_label(const Ontology& o, const std::string& label, SlotReq& out) {
  for (const auto& [domain, slots] : o.informable_slots) {
    if (label.size() > domain.size() + 1 && label.compare(0, domain.size(), domain) == 0 &&
        label[domain.size()] == '-') {
      std::string slot = label.substr(domain.size() + 1);
      if (std::find(slots.begin(), slots.end(), slot) != slots.end()) {
        out = SlotReq{domain, slot};
        return true;
      }
    }
  }
  return false;
}

std::vector<CandidateSpec> enumerate_candidates(const Ontology& o,
                                                std::size_t max_subset) {
  std::vector<CandidateSpec> out;
  std::set<std::pair<std::vector<std::string>, std::string>> seen;

  auto push = [&](CandidateSpec spec) {
    auto key = std::make_pair(spec.sources, spec.target);
    if (seen.insert(key).second) out.push_back(std::move(spec));
  };

  // TYPE-A: every informable-slot subset up to max_subset per domain.
  for (const auto& domain : o.domains) {
    auto it = o.informable_slots.find(domain);
    if (it == o.informable_slots.end()) continue;
    std::vector<std::string> slots = it->second;
    std::sort(slots.begin(), slots.end());
    const std::size_t n = slots.size();
    if (n > 24) throw InputError("extraction: domain " + domain + " has too many slots");
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) > max_subset) continue;
      CandidateSpec spec;
      spec.kind = ArcKind::TypeA;
      spec.target = retrieved_capability(domain);
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          spec.sources.push_back(slot_capability(domain, slots[i]));
          spec.slot_reqs.push_back(SlotReq{domain, slots[i]});
        }
      }
      std::sort(spec.sources.begin(), spec.sources.end());
      push(std::move(spec));
    }
  }

  // TYPE-B: booking preconditions.
  for (const auto& domain : o.bookable) {
    CandidateSpec spec;
    spec.kind = ArcKind::TypeB;
    spec.target = booked_capability(domain);
    spec.token_reqs.push_back(retrieved_capability(domain));
    spec.sources.push_back(retrieved_capability(domain));
    auto it = o.booking_required.find(domain);
    if (it != o.booking_required.end()) {
      for (const auto& slot : it->second) {
        spec.sources.push_back(slot_capability(domain, slot));
        spec.slot_reqs.push_back(SlotReq{domain, slot});
      }
    }
    std::sort(spec.sources.begin(), spec.sources.end());
    push(std::move(spec));
  }

  // TYPE-C: cross-domain seed patterns, counted when the corpus exhibits them.
  for (const auto& p : o.cross_domain_patterns) {
    CandidateSpec spec;
    spec.kind = ArcKind::TypeC;
    spec.target = p.target;
    spec.sources = p.sources;
    std::sort(spec.sources.begin(), spec.sources.end());
    for (const auto& label : spec.sources) {
      SlotReq req;
      if (parse_slot_label(o, label, req))
        spec.slot_reqs.push_back(std::move(req));
      else
        spec.token_reqs.push_back(label);
    }
    push(std::move(spec));
  }
  return out;
}

struct SessionView {
  // Per turn: belief membership and outcome stream.
  std::vector<const Turn*> turns;
  std::vector<std::set<std::string>> cumulative_outcomes;
};

SessionView make_view(const DialogueSession& s) {
  SessionView v;
  std::set<std::string> cum;
  for (const auto& t : s.turns) {
    v.turns.push_back(&t);
    for (const auto& o : t.outcomes) cum.insert(o);
    v.cumulative_outcomes.push_back(cum);
  }
  return v;
}

bool satisfied_at(const SessionView& v, std::size_t t, const CandidateSpec& spec) {
  const Turn& turn = *v.turns[t];
  for (const auto& req : spec.slot_reqs) {
    auto dit = turn.belief_state.find(req.domain);
    if (dit == turn.belief_state.end() || dit->second.count(req.slot) == 0)
      return false;
  }
  for (const auto& token : spec.token_reqs)
    if (v.cumulative_outcomes[t].count(token) == 0) return false;
  return true;
}

void scan_session(const DialogueSession& s, const std::vector<CandidateSpec>& specs,
                  std::size_t horizon, std::vector<PairStats>& acc) {
  if (s.turns.empty()) return;
  SessionView v = make_view(s);
  const std::size_t turn_count = v.turns.size();
  for (std::size_t c = 0; c < specs.size(); ++c) {
    const CandidateSpec& spec = specs[c];
    std::size_t t0 = turn_count;
    for (std::size_t t = 0; t < turn_count; ++t) {
      if (satisfied_at(v, t, spec)) {
        t0 = t;
        break;
      }
    }
    if (t0 == turn_count) continue;
    acc[c].n_s += 1;
    std::size_t last = std::min(turn_count - 1, t0 + horizon);
    for (std::size_t t = t0; t <= last; ++t) {
      const auto& outs = v.turns[t]->outcomes;
      if (std::find(outs.begin(), outs.end(), spec.target) != outs.end()) {
        acc[c].n_sv += 1;
        break;
      }
    }
  }
}

}  // namespace

CooccurrenceStats collect_stats(const Corpus& corpus, const Ontology& ontology,
                                std::size_t horizon, std::size_t max_subset) {
  if (horizon < 1) throw InputError("collect_stats: horizon must be >= 1");
  ontology.validate();
  std::vector<CandidateSpec> specs = enumerate_candidates(ontology, max_subset);

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(parallel::threads(),
                                                     corpus.sessions.size()));
  std::vector<std::vector<PairStats>> partials(
      workers, std::vector<PairStats>(specs.size()));
  parallel::parallel_for(workers, [&](std::size_t w) {
    for (std::size_t s = w; s < corpus.sessions.size(); s += workers)
      scan_session(corpus.sessions[s], specs, horizon, partials[w]);
  });

  CooccurrenceStats stats;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    PairStats total;
    for (std::size_t w = 0; w < workers; ++w) {
      total.n_s += partials[w][c].n_s;
      total.n_sv += partials[w][c].n_sv;
    }
    if (total.n_s > 0)
      stats.counts[{specs[c].sources, specs[c].target}] = total;
  }
  // Remember candidate kinds for extraction.
  for (std::size_t c = 0; c < specs.size(); ++c) {
    auto it = stats.counts.find({specs[c].sources, specs[c].target});
    if (it != stats.counts.end()) it->second.kind = specs[c].kind;
  }
  return stats;
}

std::vector<ExtractCandidate> minimal_cover(std::vector<ExtractCandidate> arcs,
                                            double theta) {
  for (const auto& a : arcs)
    if (a.rate < theta)
      throw InputError("minimal_cover: arc under theta for target " + a.target);
  std::sort(arcs.begin(), arcs.end(), [](const ExtractCandidate& x,
                                         const ExtractCandidate& y) {
    if (x.target != y.target) return x.target < y.target;
    if (x.sources.size() != y.sources.size()) return x.sources.size() < y.sources.size();
    return x.sources < y.sources;
  });
  // Dominance is transitive, so one pass against the full input equals the
  // fixpoint.
  std::vector<ExtractCandidate> kept;
  for (const auto& a : arcs) {
    bool dominated = false;
    for (const auto& b : arcs) {
      if (&a == &b || b.target != a.target) continue;
      if (b.sources.size() >= a.sources.size()) continue;
      if (b.rate >= a.rate &&
          std::includes(a.sources.begin(), a.sources.end(), b.sources.begin(),
                        b.sources.end())) {
        dominated = true;
        break;
      }
    }
    if (!dominated) kept.push_back(a);
  }
  return kept;
}

Hypergraph extract_hypergraph(const CooccurrenceStats& stats,
                              const Ontology& ontology, double theta,
                              const ExtractionOptions& options) {
  // theta = 1 is allowed: it keeps only deterministic arcs.
  if (!(theta > 0.0 && theta <= 1.0))
    throw InputError("extract_hypergraph: theta must lie in (0,1]");
  ontology.validate();

  std::vector<ExtractCandidate> candidates;
  for (const auto& [key, ps] : stats.counts) {
    if (ps.n_s < options.support_floor) continue;
    if (ps.rate() < theta) continue;
    candidates.push_back(ExtractCandidate{key.first, key.second, ps.rate(), ps.n_s,
                                          ps.kind});
  }
  // Seed-rate fallback for cross-domain patterns the corpus never exhibits.
  for (const auto& p : ontology.cross_domain_patterns) {
    std::vector<std::string> sorted = p.sources;
    std::sort(sorted.begin(), sorted.end());
    if (stats.counts.count({sorted, p.target}) != 0) continue;
    if (p.rate < theta) continue;
    candidates.push_back(ExtractCandidate{sorted, p.target, p.rate, 0, ArcKind::TypeC});
  }

  candidates = minimal_cover(std::move(candidates), theta);

  std::set<std::string> labels;
  for (const auto& domain : ontology.domains) {
    labels.insert(retrieved_capability(domain));
    auto it = ontology.informable_slots.find(domain);
    if (it != ontology.informable_slots.end())
      for (const auto& slot : it->second) labels.insert(slot_capability(domain, slot));
  }
  for (const auto& domain : ontology.bookable) labels.insert(booked_capability(domain));
  for (const auto& c : candidates) {
    labels.insert(c.target);
    for (const auto& s : c.sources) labels.insert(s);
  }

  HypergraphBuilder b;
  for (const auto& l : labels) b.add_node(l);  // lexicographic node order
  for (const auto& c : candidates)
    b.add_arc(c.sources, {c.target}, c.rate, c.kind);
  return b.build();
}

double hoeffding_bound(std::uint64_t n_s, double epsilon) {
  return std::exp(-2.0 * static_cast<double>(n_s) * epsilon * epsilon);
}

SoundnessReport soundness_report(const Hypergraph& h,
                                 const CooccurrenceStats& stats, double theta,
                                 double epsilon, std::uint64_t floor) {
  (void)theta;
  SoundnessReport report;
  for (ArcId a = 0; a < h.arc_count(); ++a) {
    const Hyperarc& arc = h.arc(a);
    SoundnessRow row;
    row.arc = a;
    row.sources = h.labels_of(arc.sources);
    row.target = h.label(arc.targets.front());
    row.rate = arc.rate;
    if (const PairStats* ps = stats.find(row.sources, row.target)) row.n_s = ps->n_s;
    row.bound = hoeffding_bound(row.n_s, epsilon);
    row.flagged = row.n_s < floor;
    if (row.flagged) ++report.flagged_count;
    report.max_bound = std::max(report.max_bound, row.bound);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string stats_to_json(const CooccurrenceStats& stats) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, ps] : stats.counts) {
    std::string name;
    for (std::size_t i = 0; i < key.first.size(); ++i) {
      if (i) name += "|";
      name += key.first[i];
    }
    name += "=>" + key.second;
    j[name] = {{"n_s", ps.n_s}, {"n_sv", ps.n_sv}, {"rate", ps.rate()},
               {"kind", std::string(to_string(ps.kind))}};
  }
  return j.dump(2) + "\n";
}

void save_stats(const std::string& path, const CooccurrenceStats& stats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write stats file: " + path);
  out << stats_to_json(stats);
}

}  // namespace cas
