#include <cmath>
#include <filesystem>
#include <fstream>

#include "cas/corpus.hpp"
#include "cas/errors.hpp"
#include "cas/extraction.hpp"
#include "cas/multiwoz.hpp"
#include "cas/rng.hpp"
#include "cas/session.hpp"
#include "doctest.h"

using namespace cas;

namespace {

SynthParams two_domain_params() {
  SynthParams p;
  p.domains = {
      SynthDomain{"hotel", {"area", "stars"}, {}, {"parking", "wifi"}, 1.0, 1.0, 4},
      SynthDomain{"museum", {"type", "zone"}, {}, {"fee"}, 1.0, 1.0, 4},
  };
  p.k_weights = {0.6, 0.4};
  p.n_sessions = 60;
  p.followups_per_class = 3;
  return p;
}

}  // namespace

TEST_CASE("phi assembles slot values, projections, and outcomes") {
  Turn t;
  CHECK(phi_labels(t, Projection::SlotValue).empty());

  t.belief_state["hotel"]["area"] = "north";
  t.belief_state["hotel"]["stars"] = "4";
  auto value_level = phi_labels(t, Projection::SlotValue);
  CHECK(value_level ==
        std::vector<std::string>{"hotel-area-north", "hotel-stars-4"});
  auto slot_level = phi_labels(t, Projection::SlotLevel);
  CHECK(slot_level == std::vector<std::string>{"hotel-area", "hotel-stars"});

  t.outcomes = {"hotel-candidates-retrieved"};
  auto with_outcome = phi_labels(t, Projection::SlotValue);
  CHECK(std::find(with_outcome.begin(), with_outcome.end(),
                  "hotel-candidates-retrieved") != with_outcome.end());
}

TEST_CASE("resolve_phi names the unresolvable label") {
  HypergraphBuilder b;
  b.add_node("hotel-area-north");
  Hypergraph h = b.build();
  Turn t;
  t.turn_id = 7;
  t.belief_state["hotel"]["area"] = "north";
  CHECK(resolve_phi(h, t, Projection::SlotValue) == NodeSet{0});
  t.belief_state["hotel"]["stars"] = "4";
  CHECK_THROWS_WITH_AS(resolve_phi(h, t, Projection::SlotValue),
                       doctest::Contains("hotel-stars-4"), InputError);
}

TEST_CASE("normalize_token") {
  CHECK(normalize_token("The Cambridge Belfry") == "the-cambridge-belfry");
  CHECK(normalize_token("") == "");
  CHECK(normalize_token("a&&b") == "a-b");
  CHECK(normalize_token("  x  ") == "x");
}

TEST_CASE("native corpus round trip is identity") {
  Corpus c = synth_corpus(two_domain_params(), 42);
  std::string once = corpus_to_json(c);
  Corpus parsed = parse_corpus(once);
  CHECK(corpus_to_json(parsed) == once);
  CHECK(parsed.sessions.size() == c.sessions.size());
  CHECK(parsed.provenance.kind == CorpusKind::Synthetic);
  CHECK(parsed.provenance.seed == 42);

  Corpus empty;
  CHECK(parse_corpus(corpus_to_json(empty)).sessions.empty());
}

TEST_CASE("corpus schema violations carry a path") {
  CHECK_THROWS_AS(parse_corpus("["), InputError);
  CHECK_THROWS_AS(parse_corpus("{}"), InputError);
  CHECK_THROWS_WITH_AS(
      parse_corpus(R"({"sessions":[{"session_id":"s","turns":[{"turn_id":0}]}]})"),
      doctest::Contains("sessions[0].turns[0]"), InputError);
  CHECK_THROWS_WITH_AS(
      parse_corpus(
          R"({"sessions":[{"session_id":"s","turns":[
               {"turn_id":1,"primary_capability":"x"},
               {"turn_id":1,"primary_capability":"x"}]}]})"),
      doctest::Contains("strictly increasing"), InputError);
}

TEST_CASE("synthetic corpora are deterministic per seed") {
  SynthParams p = two_domain_params();
  CHECK(corpus_to_json(synth_corpus(p, 1)) == corpus_to_json(synth_corpus(p, 1)));
  CHECK(corpus_to_json(synth_corpus(p, 1)) != corpus_to_json(synth_corpus(p, 2)));

  p.n_sessions = 0;
  CHECK(synth_corpus(p, 1).sessions.empty());

  SynthParams bad = two_domain_params();
  bad.domains[0].retrieval_rate = 1.5;
  CHECK_THROWS_AS(synth_corpus(bad, 1), InputError);
}

TEST_CASE("k weights shape the class count") {
  SynthParams p = two_domain_params();
  p.k_weights = {1.0};  // force K = 1
  p.n_sessions = 30;
  SynthWorld w = synth_world(p, 5);
  for (const auto& s : w.corpus.sessions) {
    std::vector<NodeSet> phis;
    for (const auto& t : s.turns)
      phis.push_back(resolve_phi(w.graph, t, Projection::SlotValue));
    CHECK(ontological_class_count(w.graph, phis) == 1);
  }
}

TEST_CASE("belief states are cumulative and turn ids increase") {
  Corpus c = synth_corpus(two_domain_params(), 7);
  for (const auto& s : c.sessions) {
    REQUIRE_FALSE(s.turns.empty());
    for (std::size_t t = 1; t < s.turns.size(); ++t) {
      CHECK(s.turns[t].turn_id > s.turns[t - 1].turn_id);
      for (const auto& [d, slots] : s.turns[t - 1].belief_state) {
        for (const auto& [slot, value] : slots) {
          REQUIRE(s.turns[t].belief_state.count(d) == 1);
          CHECK(s.turns[t].belief_state.at(d).at(slot) == value);
        }
      }
    }
  }
}

TEST_CASE("generated outcomes are always derivable from the belief phi") {
  // the completeness property: outcome tokens only ever appear after their
  // preconditions entered the belief state, so cl(phi) covers them
  SynthParams p = two_domain_params();
  p.emit_outcome_events = true;
  p.domains[0].retrieval_rate = 0.7;
  p.domains[1].retrieval_rate = 0.9;
  SynthWorld w = synth_world(p, 11);
  for (const auto& s : w.corpus.sessions) {
    for (const auto& t : s.turns) {
      if (t.outcomes.empty()) continue;
      Turn belief_only = t;
      belief_only.outcomes.clear();
      NodeSet phi = resolve_phi(w.graph, belief_only, Projection::SlotValue);
      NodeSet cl = closure(w.graph, phi);
      for (const auto& o : t.outcomes)
        CHECK(set_contains(cl, w.graph.node(o)));
    }
  }
}

TEST_CASE("planted rates are recovered by stats collection") {
  SynthParams p = two_domain_params();
  p.emit_outcome_events = true;
  p.n_sessions = 400;
  p.domains[0].retrieval_rate = 0.8;
  p.k_weights = {0.0, 1.0};  // every session visits both domains
  Corpus corpus = synth_corpus(p, 31);
  Ontology o = synth_ontology(p);
  CooccurrenceStats stats = collect_stats(corpus, o, p.horizon);
  const PairStats* ps = stats.find({"hotel-area", "hotel-stars"},
                                   "hotel-candidates-retrieved");
  REQUIRE(ps != nullptr);
  CHECK(ps->n_s == 400);
  // binomial 3-sigma band around 0.8 at n = 400
  double sigma = std::sqrt(0.8 * 0.2 / 400.0);
  CHECK(ps->rate() > 0.8 - 3 * sigma);
  CHECK(ps->rate() < 0.8 + 3 * sigma);
}

TEST_CASE("slot omission injection") {
  Corpus c = synth_corpus(two_domain_params(), 9);

  Corpus same = inject_slot_omission(c, 0.0, 77);
  CHECK(corpus_to_json(same) == corpus_to_json(c));

  Corpus all_gone = inject_slot_omission(c, 1.0, 77);
  for (const auto& s : all_gone.sessions)
    for (const auto& t : s.turns) CHECK(t.belief_state.empty());

  // per-turn capability sets only shrink
  Corpus some = inject_slot_omission(c, 0.3, 77);
  for (std::size_t si = 0; si < c.sessions.size(); ++si) {
    for (std::size_t ti = 0; ti < c.sessions[si].turns.size(); ++ti) {
      auto before = phi_labels(c.sessions[si].turns[ti], Projection::SlotValue);
      auto after = phi_labels(some.sessions[si].turns[ti], Projection::SlotValue);
      CHECK(std::includes(before.begin(), before.end(), after.begin(), after.end()));
    }
  }

  // measured omission fraction is near r
  std::size_t total = 0, removed = 0;
  for (std::size_t si = 0; si < c.sessions.size(); ++si) {
    const Turn& last = c.sessions[si].turns.back();
    const Turn& last_after = some.sessions[si].turns.back();
    for (const auto& [d, slots] : last.belief_state) {
      for (const auto& [slot, v] : slots) {
        ++total;
        auto dit = last_after.belief_state.find(d);
        if (dit == last_after.belief_state.end() || dit->second.count(slot) == 0)
          ++removed;
      }
    }
  }
  REQUIRE(total >= 100);
  double frac = static_cast<double>(removed) / static_cast<double>(total);
  double sigma = std::sqrt(0.3 * 0.7 / static_cast<double>(total));
  CHECK(frac > 0.3 - 3 * sigma);
  CHECK(frac < 0.3 + 3 * sigma);

  CHECK_THROWS_AS(inject_slot_omission(c, 1.5, 1), InputError);
}

TEST_CASE("multiwoz adapter maps the 2.2 layout") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "cas_mwoz_fixture";
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "dialogues_001.json");
    f << R"([
      {
        "dialogue_id": "PMUL0001.json",
        "services": ["hotel"],
        "turns": [
          {"turn_id": "0", "speaker": "USER", "utterance": "need a hotel up north",
           "frames": [{"service": "hotel",
                       "state": {"slot_values": {"hotel-area": ["north"]}}}]},
          {"turn_id": "1", "speaker": "SYSTEM", "utterance": "found 3 hotels"},
          {"turn_id": "2", "speaker": "USER", "utterance": "4 stars please",
           "frames": [{"service": "hotel",
                       "state": {"slot_values": {"hotel-area": ["north"],
                                                  "hotel-stars": ["4"]}}}]},
          {"turn_id": "3", "speaker": "SYSTEM", "utterance": "booked!"}
        ]
      }
    ])";
  }
  {
    std::ofstream f(dir / "dialog_acts.json");
    f << R"({
      "PMUL0001.json": {
        "1": {"dialog_act": {"Hotel-Inform": [["choice", "3"]]}},
        "3": {"dialog_act": {"Booking-Book": [["ref", "ABC"]]}}
      }
    })";
  }

  Corpus c = load_multiwoz(dir.string(), {});
  REQUIRE(c.sessions.size() == 1);
  REQUIRE(c.sessions[0].turns.size() == 2);
  CHECK(c.provenance.kind == CorpusKind::Multiwoz);

  const Turn& t0 = c.sessions[0].turns[0];
  CHECK(t0.belief_state.at("hotel").at("area") == "north");
  CHECK(t0.outcomes == std::vector<std::string>{"hotel-candidates-retrieved"});
  CHECK(t0.primary_capability == "hotel-candidates-retrieved");
  CHECK(t0.answer_text == "found 3 hotels");

  const Turn& t1 = c.sessions[0].turns[1];
  CHECK(t1.belief_state.at("hotel").at("stars") == "4");
  CHECK(t1.outcomes == std::vector<std::string>{"hotel-booked"});

  fs::remove_all(dir);
}
