#include "cas/baselines.hpp"

#include <sstream>

#include "cas/errors.hpp"
#include "cas/provenance.hpp"
#include "cas/store.hpp"
#include "json.hpp"

namespace cas {

std::size_t SemanticCache::put(std::string answer, std::string origin_tenant,
                               NodeSet origin_witness) {
  SemanticEntry e;
  e.emb = embed(answer);
  e.answer = std::move(answer);
  e.origin_tenant = std::move(origin_tenant);
  e.origin_witness = std::move(origin_witness);
  entries_.push_back(std::move(e));
  return entries_.size() - 1;
}

std::optional<SemanticCache::Hit> SemanticCache::lookup(const Embedding& query) const {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    double sim = cosine(entries_[i].emb, query);
    if (sim <= tau_) continue;
    if (!best || sim > best->similarity) best = Hit{i, sim};
  }
  return best;
}

bool unsafe_hit_audit(const SemanticEntry& hit, const NodeSet& c_t) {
  return !is_subset(hit.origin_witness, c_t);
}

UnsoundDemoReport unsound_demo(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("unsound_demo: tau must lie in (0,1)");

  HypergraphBuilder b;
  b.add_node("read_PII");
  b.add_node("query_db");
  b.add_node("gen");
  b.add_node("f_leak");
  b.add_arc({"read_PII", "gen"}, {"f_leak"});
  Hypergraph h = b.build();
  ForbiddenSet f_t1 = h.make_forbidden({"f_leak"});

  const std::string answer = "Balance: $247.50";
  NodeSet phi_t1 = h.resolve({"query_db", "gen"});
  NodeSet phi_t2 = h.resolve({"read_PII", "query_db", "gen"});
  NodeSet cl_t1 = closure(h, phi_t1);
  NodeSet w_t2 = phi_t2;  // the T2 answer consumed all three capabilities

  std::ostringstream log;
  UnsoundDemoReport report;
  log << "fixture: V={read_PII,query_db,gen,f_leak}, arc {read_PII,gen}->{f_leak}, "
         "F(T1)={f_leak}, tau=" << tau << "\n";

  // q1: tenant T2 (F'={} at generation) produces and stores the answer.
  SemanticCache cosine_cache(tau);
  cosine_cache.put(answer, "T2", w_t2);

  CasStore cas;
  {
    CasEntry e;
    e.answer = answer;
    e.witness.members = w_t2;
    e.f_snap = f_t1;  // same forbidden-set members; the rejection must come
                      // from witness containment, not a snapshot mismatch
    e.cert = derive_certificate(h, phi_t2, h.node("query_db"));
    e.cert.base = w_t2;
    e.t_store = 1;
    cas.put(std::move(e));
  }
  log << "q1 (T2): RAG generates \"" << answer << "\", stored with witness "
         "{read_PII,query_db,gen}\n";

  // q2: tenant T1 asks the same question.
  Embedding query = embed(answer);
  if (auto hit = cosine_cache.lookup(query)) {
    report.semantic_hit = true;
    bool unsafe = unsafe_hit_audit(cosine_cache.entry(hit->id), cl_t1);
    if (unsafe) ++report.semantic_unsafe_hits;
    log << "q2 (T1) cosine lane: hit at similarity " << hit->similarity
        << (unsafe ? " -> UNSAFE (witness not contained in cl(phi_T1))" : " -> safe")
        << "\n";
  } else {
    log << "q2 (T1) cosine lane: miss\n";
  }

  auto cas_hit = cas_lookup(cas, query, cl_t1, f_t1);
  report.cas_rejected = !cas_hit.has_value();
  log << "q2 (T1) cas lane: " << (cas_hit ? "hit" : "miss (containment check rejects)")
      << "\n";
  if (cas_hit && !is_subset(cas.entry(cas_hit->id).witness.members, cl_t1))
    ++report.cas_unsafe_hits;

  // T1's own RAG turn stores a legitimate entry ...
  {
    CasEntry e;
    e.answer = answer;
    e.witness.members = phi_t1;
    e.f_snap = f_t1;
    e.cert = derive_certificate(h, phi_t1, h.node("query_db"));
    e.cert.base = phi_t1;
    e.t_store = 2;
    cas.put(std::move(e));
  }
  log << "q2 (T1): RAG fallback, stored with witness {query_db,gen}\n";

  // q3: ... which serves T1's repeat of the question safely. The T2 entry
  // still ranks first at similarity 1.0 and is skipped by the witness check.
  if (auto hit = cas_lookup(cas, query, cl_t1, f_t1)) {
    bool unsafe = !is_subset(cas.entry(hit->id).witness.members, cl_t1);
    if (unsafe) ++report.cas_unsafe_hits;
    report.cas_self_hit_safe = !unsafe && hit->id == 1;
    log << "q3 (T1) cas lane: hit on entry " << hit->id
        << (unsafe ? " -> UNSAFE" : " (own witness contained, safe reuse)") << "\n";
  } else {
    log << "q3 (T1) cas lane: miss\n";
  }

  report.transcript = log.str();
  nlohmann::ordered_json j;
  j["tau"] = tau;
  j["semantic_unsafe_hits"] = report.semantic_unsafe_hits;
  j["cas_unsafe_hits"] = report.cas_unsafe_hits;
  j["semantic_hit"] = report.semantic_hit;
  j["cas_rejected_cross_tenant"] = report.cas_rejected;
  j["cas_self_hit_safe"] = report.cas_self_hit_safe;
  report.json = j.dump(2) + "\n";
  return report;
}

}  // namespace cas
