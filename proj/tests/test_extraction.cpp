#include <cmath>

#include "cas/errors.hpp"
#include "cas/extraction.hpp"
#include "cas/parallel.hpp"
#include "cas/rng.hpp"
#include "doctest.h"

using namespace cas;

namespace {

// One-domain ontology with two query slots.
Ontology small_ontology() {
  Ontology o;
  o.domains = {"hotel"};
  o.informable_slots["hotel"] = {"area", "stars"};
  return o;
}

// Hand-built corpus: n sessions observe both slots at turn 0; the outcome
// fires at turn `offset` in the first `hits` sessions.
Corpus planted_corpus(std::size_t n, std::size_t hits, std::uint32_t offset) {
  Corpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    DialogueSession s;
    s.session_id = "s" + std::to_string(i);
    for (std::uint32_t t = 0; t < 4; ++t) {
      Turn turn;
      turn.turn_id = t;
      turn.belief_state["hotel"]["area"] = "north";
      turn.belief_state["hotel"]["stars"] = "4";
      turn.primary_capability = "hotel-candidates-retrieved";
      if (i < hits && t == offset) turn.outcomes = {"hotel-candidates-retrieved"};
      s.turns.push_back(std::move(turn));
    }
    corpus.sessions.push_back(std::move(s));
  }
  return corpus;
}

// Independent recount for one (S, v) pair, straight from the definition.
PairStats recount(const Corpus& corpus, const std::vector<std::string>& slots,
                  const std::string& domain, const std::string& outcome,
                  std::size_t h) {
  PairStats ps;
  for (const auto& s : corpus.sessions) {
    std::size_t t0 = s.turns.size();
    for (std::size_t t = 0; t < s.turns.size(); ++t) {
      auto dit = s.turns[t].belief_state.find(domain);
      if (dit == s.turns[t].belief_state.end()) continue;
      bool all = true;
      for (const auto& slot : slots)
        if (dit->second.count(slot) == 0) { all = false; break; }
      if (all) {
        t0 = t;
        break;
      }
    }
    if (t0 == s.turns.size()) continue;
    ps.n_s += 1;
    for (std::size_t t = t0; t < s.turns.size() && t <= t0 + h; ++t) {
      const auto& outs = s.turns[t].outcomes;
      if (std::find(outs.begin(), outs.end(), outcome) != outs.end()) {
        ps.n_sv += 1;
        break;
      }
    }
  }
  return ps;
}

}  // namespace

TEST_CASE("collect_stats counts sessions once and respects the horizon") {
  Ontology o = small_ontology();

  // outcome always follows: rate 1.0
  Corpus always = planted_corpus(50, 50, 1);
  CooccurrenceStats stats = collect_stats(always, o, 3);
  const PairStats* ps = stats.find({"hotel-area", "hotel-stars"},
                                   "hotel-candidates-retrieved");
  REQUIRE(ps != nullptr);
  CHECK(ps->n_s == 50);
  CHECK(ps->n_sv == 50);
  CHECK(ps->rate() == doctest::Approx(1.0));

  // 80 of 100 applicable sessions derive the outcome
  Corpus planted = planted_corpus(100, 80, 2);
  CooccurrenceStats stats80 = collect_stats(planted, o, 3);
  const PairStats* ps80 = stats80.find({"hotel-area", "hotel-stars"},
                                       "hotel-candidates-retrieved");
  REQUIRE(ps80 != nullptr);
  CHECK(ps80->rate() == doctest::Approx(0.80));
  PairStats manual = recount(planted, {"area", "stars"}, "hotel",
                             "hotel-candidates-retrieved", 3);
  CHECK(ps80->n_s == manual.n_s);
  CHECK(ps80->n_sv == manual.n_sv);

  // outcome planted beyond the horizon does not count
  Corpus late = planted_corpus(10, 10, 3);
  CooccurrenceStats stats_late = collect_stats(late, o, 2);
  const PairStats* ps_late = stats_late.find({"hotel-area", "hotel-stars"},
                                             "hotel-candidates-retrieved");
  REQUIRE(ps_late != nullptr);
  CHECK(ps_late->n_sv == 0);

  // never-observed source sets are absent
  CHECK(stats80.find({"hotel-area"}, "hotel-booked") == nullptr);
  CHECK_THROWS_AS(collect_stats(always, o, 0), InputError);
}

TEST_CASE("stats collection is identical serial and parallel") {
  Ontology o = small_ontology();
  Corpus corpus = planted_corpus(200, 137, 1);
  parallel::set_threads(1);
  CooccurrenceStats serial = collect_stats(corpus, o, 3);
  parallel::set_threads(4);
  CooccurrenceStats par = collect_stats(corpus, o, 3);
  parallel::set_threads(1);
  REQUIRE(serial.counts.size() == par.counts.size());
  for (const auto& [key, ps] : serial.counts) {
    auto it = par.counts.find(key);
    REQUIRE(it != par.counts.end());
    CHECK(it->second.n_s == ps.n_s);
    CHECK(it->second.n_sv == ps.n_sv);
  }
}

TEST_CASE("extract_hypergraph retains only sound arcs") {
  Ontology o = small_ontology();
  Corpus planted = planted_corpus(100, 80, 1);
  CooccurrenceStats stats = collect_stats(planted, o, 3);
  ExtractionOptions opts;
  opts.support_floor = 30;

  Hypergraph kept = extract_hypergraph(stats, o, 0.75, opts);
  CHECK(kept.arc_count() >= 1);
  for (const auto& arc : kept.arcs()) CHECK(arc.rate >= 0.75);

  Hypergraph strict = extract_hypergraph(stats, o, 0.85, opts);
  CHECK(strict.arc_count() == 0);
  CHECK(strict.node_count() >= 3);  // slot tokens and the outcome node stay

  // theta = 1 keeps only deterministic arcs
  Corpus mixed = planted_corpus(100, 100, 1);
  CooccurrenceStats det = collect_stats(mixed, o, 3);
  Hypergraph at_one = extract_hypergraph(det, o, 1.0, opts);
  CHECK(at_one.arc_count() >= 1);
  for (const auto& arc : at_one.arcs()) CHECK(arc.rate == 1.0);
  CHECK(extract_hypergraph(stats, o, 1.0, opts).arc_count() == 0);

  CHECK_THROWS_AS(extract_hypergraph(stats, o, 0.0, opts), InputError);
  CHECK_THROWS_AS(extract_hypergraph(stats, o, 1.1, opts), InputError);
}

TEST_CASE("minimal_cover removes dominated source sets") {
  auto mk = [](std::vector<std::string> s, double rate) {
    return ExtractCandidate{std::move(s), "v", rate, 100, ArcKind::TypeA};
  };

  // single arc unchanged
  auto one = minimal_cover({mk({"a"}, 0.9)}, 0.75);
  CHECK(one.size() == 1);

  // strict subset with >= rate dominates
  auto dominated = minimal_cover({mk({"a"}, 0.9), mk({"a", "b"}, 0.85)}, 0.75);
  REQUIRE(dominated.size() == 1);
  CHECK(dominated[0].sources == std::vector<std::string>{"a"});

  // superset with strictly higher rate survives
  auto both = minimal_cover({mk({"a"}, 0.8), mk({"a", "b"}, 0.9)}, 0.75);
  CHECK(both.size() == 2);

  // incomparable sets are kept regardless of rates
  auto incomparable = minimal_cover({mk({"a"}, 0.99), mk({"b"}, 0.76)}, 0.75);
  CHECK(incomparable.size() == 2);

  // dominance is transitive through removed arcs
  auto chain = minimal_cover(
      {mk({"a"}, 0.9), mk({"a", "b"}, 0.9), mk({"a", "b", "c"}, 0.8)}, 0.75);
  REQUIRE(chain.size() == 1);
  CHECK(chain[0].sources == std::vector<std::string>{"a"});

  CHECK_THROWS_AS(minimal_cover({mk({"a"}, 0.5)}, 0.75), InputError);
}

TEST_CASE("hoeffding bound values") {
  CHECK(hoeffding_bound(100, 0.15) == doctest::Approx(std::exp(-4.5)).epsilon(1e-12));
  CHECK(std::abs(hoeffding_bound(100, 0.15) - 0.011109) < 5e-7);
  CHECK(hoeffding_bound(200, 0.15) == doctest::Approx(std::exp(-9.0)).epsilon(1e-12));
  CHECK(hoeffding_bound(200, 0.15) == doctest::Approx(1.2341e-4).epsilon(1e-4));
  CHECK(hoeffding_bound(100, 0.0) == 1.0);
  CHECK(hoeffding_bound(1, 1e-9) == doctest::Approx(1.0));
}

TEST_CASE("soundness report flags low-support arcs") {
  Ontology o = small_ontology();
  Corpus planted = planted_corpus(100, 80, 1);
  CooccurrenceStats stats = collect_stats(planted, o, 3);
  ExtractionOptions opts;
  opts.support_floor = 30;
  Hypergraph h = extract_hypergraph(stats, o, 0.75, opts);

  SoundnessReport rep = soundness_report(h, stats, 0.75, 0.15, 100);
  REQUIRE_FALSE(rep.rows.empty());
  CHECK(rep.flagged_count == 0);
  CHECK(rep.max_bound <= 0.0112);

  // with a floor above the support, everything is flagged
  SoundnessReport strict = soundness_report(h, stats, 0.75, 0.15, 1000);
  CHECK(strict.flagged_count == strict.rows.size());

  // the bound at n_S = 20 is e^{-0.9}
  CHECK(hoeffding_bound(20, 0.15) == doctest::Approx(std::exp(-0.9)).epsilon(1e-12));
  CHECK(hoeffding_bound(20, 0.15) == doctest::Approx(0.40657).epsilon(1e-4));

  SoundnessReport empty = soundness_report(Hypergraph{}, stats, 0.75, 0.15);
  CHECK(empty.rows.empty());
}

TEST_CASE("planted high-rate arcs are reliably retained") {
  Ontology o = small_ontology();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // binomial draw around 0.9 with n_S = 200 essentially never dips to 0.75
    std::size_t hits = 0;
    {
      Rng rng(seed);
      for (int i = 0; i < 200; ++i)
        if (rng.bernoulli(0.9)) ++hits;
    }
    Corpus corpus = planted_corpus(200, hits, 1);
    CooccurrenceStats stats = collect_stats(corpus, o, 3);
    Hypergraph h = extract_hypergraph(stats, o, 0.75, {});
    bool found = false;
    for (const auto& arc : h.arcs())
      if (h.label(arc.targets.front()) == "hotel-candidates-retrieved") found = true;
    CHECK(found);
  }
}

TEST_CASE("cross-domain seed patterns fall back to the seeded rate") {
  Ontology o = small_ontology();
  o.domains.push_back("taxi");
  o.informable_slots["taxi"] = {"destination"};
  o.cross_domain_patterns.push_back(
      CrossDomainPattern{{"hotel-candidates-retrieved", "taxi-destination"},
                         "taxi-candidates-retrieved",
                         0.8});
  o.cross_domain_patterns.push_back(
      CrossDomainPattern{{"hotel-booked"}, "taxi-booked", 0.5});

  Corpus planted = planted_corpus(100, 80, 1);  // never exhibits the patterns
  CooccurrenceStats stats = collect_stats(planted, o, 3);
  Hypergraph h = extract_hypergraph(stats, o, 0.75, {});
  bool kept_high = false, kept_low = false;
  for (const auto& arc : h.arcs()) {
    if (arc.kind != ArcKind::TypeC) continue;
    std::string target = h.label(arc.targets.front());
    if (target == "taxi-candidates-retrieved") kept_high = true;
    if (target == "taxi-booked") kept_low = true;
  }
  CHECK(kept_high);        // seed rate 0.8 >= theta
  CHECK_FALSE(kept_low);   // seed rate 0.5 < theta
}

TEST_CASE("extraction from the synthetic generator reproduces non-compositionality") {
  SynthParams params = default_synth_params();
  params.n_sessions = 400;
  params.emit_outcome_events = true;
  params.include_booking = true;
  params.k_weights = {0.0, 0.0, 0.0, 1.0};  // visit every domain
  Corpus corpus = synth_corpus(params, 99);
  Ontology o = synth_ontology(params);

  CooccurrenceStats stats = collect_stats(corpus, o, params.horizon);
  Hypergraph h = extract_hypergraph(stats, o, 0.75, {});

  // the hotel booking arc: candidates-retrieved + name/day/people/stay
  const Hyperarc* booking = nullptr;
  for (const auto& arc : h.arcs()) {
    if (arc.kind == ArcKind::TypeB &&
        h.label(arc.targets.front()) == "hotel-booked" && arc.sources.size() >= 3)
      booking = &arc;
  }
  REQUIRE(booking != nullptr);
  CHECK(booking->sources.size() == 5);

  ForbiddenSet f = h.make_forbidden({"hotel-booked"});
  NodeSet sources = booking->sources;
  NodeSet a(sources.begin(), sources.begin() + 3);
  NodeSet b(sources.begin() + 3, sources.end());
  CHECK(is_safe(h, f, a));
  CHECK(is_safe(h, f, b));
  CHECK_FALSE(is_safe(h, f, set_union(a, b)));

  auto defect = compositionality_defect(h, f);
  CHECK(defect.total >= 15);  // the fan-in-5 arc alone forces 15 pairs
}
