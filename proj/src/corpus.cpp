#include "cas/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "cas/errors.hpp"
#include "cas/rng.hpp"
#include "json.hpp"

namespace cas {

std::string normalize_token(const std::string& raw) {
  std::string out;
  bool pending_dash = false;
  for (char c : raw) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (pending_dash && !out.empty()) out.push_back('-');
      pending_dash = false;
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      pending_dash = true;
    }
  }
  return out;
}

std::vector<std::string> phi_labels(const Turn& turn, Projection projection) {
  std::vector<std::string> labels;
  for (const auto& [domain, slots] : turn.belief_state) {
    for (const auto& [slot, value] : slots) {
      if (projection == Projection::SlotValue)
        labels.push_back(domain + "-" + slot + "-" + value);
      else
        labels.push_back(domain + "-" + slot);
    }
  }
  for (const auto& o : turn.outcomes) labels.push_back(o);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

NodeSet resolve_phi(const Hypergraph& h, const Turn& turn, Projection projection) {
  NodeSet out;
  for (const auto& label : phi_labels(turn, projection)) {
    auto id = h.find_node(label);
    if (!id)
      throw InputError("unresolvable capability label in turn " +
                       std::to_string(turn.turn_id) + ": " + label);
    out.push_back(*id);
  }
  return make_set(std::move(out));
}

namespace {

std::string_view kind_name(CorpusKind k) {
  switch (k) {
    case CorpusKind::Native: return "native";
    case CorpusKind::Multiwoz: return "multiwoz";
    case CorpusKind::Synthetic: return "synthetic";
  }
  return "native";
}

CorpusKind kind_from_name(std::string_view s) {
  if (s == "native") return CorpusKind::Native;
  if (s == "multiwoz") return CorpusKind::Multiwoz;
  if (s == "synthetic") return CorpusKind::Synthetic;
  throw InputError("unknown corpus provenance kind: " + std::string(s));
}

}  // namespace

Corpus parse_corpus(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("corpus parse error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("sessions") || !j["sessions"].is_array())
    throw InputError("corpus file: missing \"sessions\" array");
  Corpus corpus;
  corpus.ontology_ref = j.value("ontology_ref", std::string());
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    corpus.provenance.kind = kind_from_name(p.value("kind", std::string("native")));
    corpus.provenance.seed = p.value("seed", std::uint64_t{0});
    corpus.provenance.params = p.value("params", std::string());
  }
  std::size_t si = 0;
  for (const auto& s : j["sessions"]) {
    std::string where = "sessions[" + std::to_string(si) + "]";
    if (!s.contains("session_id") || !s["session_id"].is_string())
      throw InputError("corpus file: " + where + ".session_id missing");
    DialogueSession session;
    session.session_id = s["session_id"].get<std::string>();
    if (!s.contains("turns") || !s["turns"].is_array())
      throw InputError("corpus file: " + where + ".turns missing");
    std::uint32_t prev_id = 0;
    bool first = true;
    std::size_t ti = 0;
    for (const auto& t : s["turns"]) {
      std::string twhere = where + ".turns[" + std::to_string(ti) + "]";
      Turn turn;
      if (!t.contains("turn_id") || !t["turn_id"].is_number_unsigned())
        throw InputError("corpus file: " + twhere + ".turn_id missing");
      turn.turn_id = t["turn_id"].get<std::uint32_t>();
      if (!first && turn.turn_id <= prev_id)
        throw InputError("corpus file: " + twhere + " turn_ids not strictly increasing");
      prev_id = turn.turn_id;
      first = false;
      if (t.contains("belief_state")) {
        if (!t["belief_state"].is_object())
          throw InputError("corpus file: " + twhere + ".belief_state must be an object");
        for (auto dit = t["belief_state"].begin(); dit != t["belief_state"].end(); ++dit) {
          if (!dit.value().is_object())
            throw InputError("corpus file: " + twhere + ".belief_state." + dit.key() +
                             " must be an object");
          for (auto sit = dit.value().begin(); sit != dit.value().end(); ++sit)
            turn.belief_state[dit.key()][sit.key()] = sit.value().get<std::string>();
        }
      }
      turn.outcomes = t.value("outcomes", std::vector<std::string>{});
      if (!t.contains("primary_capability") || !t["primary_capability"].is_string())
        throw InputError("corpus file: " + twhere + ".primary_capability missing");
      turn.primary_capability = t["primary_capability"].get<std::string>();
      if (t.contains("tenant") && !t["tenant"].is_null())
        turn.tenant = t["tenant"].get<std::string>();
      if (t.contains("answer_text") && !t["answer_text"].is_null())
        turn.answer_text = t["answer_text"].get<std::string>();
      if (t.contains("query_text") && !t["query_text"].is_null())
        turn.query_text = t["query_text"].get<std::string>();
      session.turns.push_back(std::move(turn));
      ++ti;
    }
    corpus.sessions.push_back(std::move(session));
    ++si;
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

std::string corpus_to_json(const Corpus& corpus) {
  nlohmann::ordered_json j;
  j["ontology_ref"] = corpus.ontology_ref;
  j["provenance"] = {{"kind", std::string(kind_name(corpus.provenance.kind))},
                     {"seed", corpus.provenance.seed},
                     {"params", corpus.provenance.params}};
  j["sessions"] = nlohmann::ordered_json::array();
  for (const auto& s : corpus.sessions) {
    nlohmann::ordered_json js;
    js["session_id"] = s.session_id;
    js["turns"] = nlohmann::ordered_json::array();
    for (const auto& t : s.turns) {
      nlohmann::ordered_json jt;
      jt["turn_id"] = t.turn_id;
      jt["belief_state"] = nlohmann::ordered_json::object();
      for (const auto& [d, slots] : t.belief_state) {
        nlohmann::ordered_json jd = nlohmann::ordered_json::object();
        for (const auto& [slot, value] : slots) jd[slot] = value;
        jt["belief_state"][d] = std::move(jd);
      }
      jt["outcomes"] = t.outcomes;
      jt["primary_capability"] = t.primary_capability;
      if (t.tenant) jt["tenant"] = *t.tenant;
      if (t.answer_text) jt["answer_text"] = *t.answer_text;
      if (t.query_text) jt["query_text"] = *t.query_text;
      js["turns"].push_back(std::move(jt));
    }
    j["sessions"].push_back(std::move(js));
  }
  return j.dump(2) + "\n";
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file: " + path);
  out << corpus_to_json(corpus);
}

// ---- Synthetic generator ----------------------------------------------------

namespace {

const std::vector<std::string>& value_pool() {
  static const std::vector<std::string> pool = {
      "amber", "blue", "coral", "dune",  "emerald", "fern",
      "gold",  "haze", "iris",  "jade",  "kelp",    "lime"};
  return pool;
}

constexpr const char* kRushSlot = "rush";
constexpr const char* kRushValue = "now";
constexpr const char* kDuplicateAnswer = "Yes, that is available right now.";

std::string followup_label(const std::string& domain, const std::string& name) {
  return domain + "-info-" + name;
}

std::string unverified_label(const std::string& domain) {
  return domain + "-unverified-commit";
}

void validate_params(const SynthParams& p) {
  if (p.domains.empty()) throw InputError("synth params: at least one domain required");
  if (p.k_weights.empty()) throw InputError("synth params: k_weights empty");
  double total = 0.0;
  for (double w : p.k_weights) {
    if (w < 0.0) throw InputError("synth params: negative k weight");
    total += w;
  }
  if (total <= 0.0) throw InputError("synth params: k_weights sum to zero");
  for (const auto& d : p.domains) {
    if (d.name.empty() || d.query_slots.empty())
      throw InputError("synth params: domain needs a name and query slots");
    if (d.values_per_slot < 1 || d.values_per_slot > value_pool().size())
      throw InputError("synth params: values_per_slot outside 1.." +
                       std::to_string(value_pool().size()));
    if (!(d.retrieval_rate >= 0.0 && d.retrieval_rate <= 1.0) ||
        !(d.booking_rate >= 0.0 && d.booking_rate <= 1.0))
      throw InputError("synth params: rates must lie in [0,1]");
  }
  if (p.tenants.empty()) throw InputError("synth params: tenants empty");
}

std::size_t sample_k(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform01() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return i + 1;
  }
  return weights.size();
}

std::string canonical_anchor_answer(
    const SynthDomain& d, const std::map<std::string, std::string>& values) {
  std::string s = d.name + " options found:";
  for (const auto& slot : d.query_slots) s += " " + slot + " " + values.at(slot);
  return s;
}

std::string canonical_followup_answer(
    const SynthDomain& d, const std::string& name,
    const std::map<std::string, std::string>& values) {
  return d.name + " info " + name + ": yes for " + d.query_slots.front() + " " +
         values.at(d.query_slots.front());
}

}  // namespace

SynthParams default_synth_params() {
  SynthParams p;
  p.domains = {
      SynthDomain{"hotel", {"area", "stars"}, {"name", "day", "people", "stay"},
                  {"parking", "wifi", "phone"}, 1.0, 1.0, 6},
      SynthDomain{"restaurant", {"food", "pricerange"}, {"day", "people", "time"},
                  {"phone", "address"}, 1.0, 1.0, 6},
      SynthDomain{"attraction", {"type", "area"}, {}, {"fee", "hours"}, 1.0, 1.0, 6},
      SynthDomain{"train", {"departure", "destination"}, {"day", "people"},
                  {"duration", "price"}, 1.0, 1.0, 6},
  };
  p.followups_per_class = 6;
  p.repeat_rate = 0.35;
  p.duplicate_answer_rate = 0.05;
  p.tenants = {"t0", "t1", "t2"};
  return p;
}

Ontology synth_ontology(const SynthParams& params) {
  validate_params(params);
  Ontology o;
  for (const auto& d : params.domains) {
    o.domains.push_back(d.name);
    std::vector<std::string> slots = d.query_slots;
    slots.insert(slots.end(), d.booking_slots.begin(), d.booking_slots.end());
    slots.push_back(kRushSlot);
    std::sort(slots.begin(), slots.end());
    slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
    o.informable_slots[d.name] = slots;
    if (!d.booking_slots.empty()) {
      o.bookable.push_back(d.name);
      o.booking_required[d.name] = d.booking_slots;
    }
  }
  return o;
}

Corpus synth_corpus(const SynthParams& params, std::uint64_t seed) {
  validate_params(params);
  Rng rng(seed);
  Corpus corpus;
  corpus.ontology_ref = "synthetic";
  corpus.provenance.kind = CorpusKind::Synthetic;
  corpus.provenance.seed = seed;
  {
    std::ostringstream os;
    os << "sessions=" << params.n_sessions << " domains=" << params.domains.size()
       << (params.emit_outcome_events ? " events" : " simulation");
    corpus.provenance.params = os.str();
  }

  for (std::size_t si = 0; si < params.n_sessions; ++si) {
    DialogueSession session;
    {
      std::ostringstream os;
      os << "s" << si;
      session.session_id = os.str();
    }
    const std::string& tenant = params.tenants[si % params.tenants.size()];
    std::size_t k = std::min(sample_k(params.k_weights, rng), params.domains.size());
    std::vector<std::size_t> order(params.domains.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    order.resize(k);

    bool forbidden_session = rng.bernoulli(params.forbidden_session_rate);

    std::map<std::string, std::map<std::string, std::string>> belief;  // cumulative
    std::uint32_t turn_id = 0;
    // Class-level questions surface like their answers (a repeat ask lands in
    // the stored answer's embedding region); sub-questions keep their own
    // short surface form so similarity cannot confuse them with answers.
    auto push_turn = [&](const std::string& primary, std::vector<std::string> outcomes,
                         const std::string& answer, const std::string& query) {
      Turn t;
      t.turn_id = turn_id++;
      t.belief_state = belief;
      t.outcomes = std::move(outcomes);
      t.primary_capability = primary;
      t.tenant = tenant;
      t.answer_text = answer;
      t.query_text = query;
      session.turns.push_back(std::move(t));
    };

    for (std::size_t ci = 0; ci < order.size(); ++ci) {
      const SynthDomain& d = params.domains[order[ci]];
      std::map<std::string, std::string> values;
      for (const auto& slot : d.query_slots)
        values[slot] = value_pool()[rng.below(d.values_per_slot)];
      bool duplicate = rng.bernoulli(params.duplicate_answer_rate);

      for (const auto& slot : d.query_slots) belief[d.name][slot] = values.at(slot);

      if (params.emit_outcome_events) {
        // Extraction corpus: outcome tokens fire per the planted true rates
        // within the horizon of the first qualifying turn.
        bool fires = rng.bernoulli(d.retrieval_rate);
        std::size_t offset = rng.below(params.horizon + 1);
        std::string anchor = canonical_anchor_answer(d, values);
        push_turn(retrieved_capability(d.name),
                  (fires && offset == 0) ? std::vector<std::string>{retrieved_capability(d.name)}
                                         : std::vector<std::string>{},
                  anchor, anchor);
        for (std::size_t off = 1; off <= params.horizon; ++off) {
          push_turn(retrieved_capability(d.name),
                    (fires && offset == off)
                        ? std::vector<std::string>{retrieved_capability(d.name)}
                        : std::vector<std::string>{},
                    anchor, anchor);
        }
        if (params.include_booking && !d.booking_slots.empty() && fires) {
          for (const auto& slot : d.booking_slots)
            belief[d.name][slot] = value_pool()[rng.below(d.values_per_slot)];
          bool booked = rng.bernoulli(d.booking_rate);
          std::size_t boff = rng.below(params.horizon + 1);
          for (std::size_t off = 0; off <= params.horizon; ++off) {
            push_turn(booked_capability(d.name),
                      (booked && boff == off)
                          ? std::vector<std::string>{booked_capability(d.name)}
                          : std::vector<std::string>{},
                      "booking update for " + d.name,
                      "q " + booked_capability(d.name));
          }
        }
        continue;
      }

      // Simulation corpus: intro turn then follow-up asks over derivable
      // capabilities. Outcomes stay out of the stream; the closure derives
      // them from the planted arcs.
      std::string anchor_answer =
          duplicate ? kDuplicateAnswer : canonical_anchor_answer(d, values);
      push_turn(retrieved_capability(d.name), {}, anchor_answer, anchor_answer);

      if (forbidden_session && ci == 0) {
        belief[d.name][kRushSlot] = kRushValue;
        push_turn(retrieved_capability(d.name), {},
                  canonical_anchor_answer(d, values),
                  "q " + retrieved_capability(d.name));
      }

      std::vector<std::pair<std::string, std::string>> asked;  // (primary, answer)
      for (std::size_t fi = 0; fi < params.followups_per_class; ++fi) {
        bool repeat = !asked.empty() && rng.bernoulli(params.repeat_rate);
        if (repeat) {
          const auto& [primary, answer] = asked[rng.below(asked.size())];
          push_turn(primary, {}, answer, "q " + primary);
        } else if (!d.followup_caps.empty()) {
          const std::string& name = d.followup_caps[fi % d.followup_caps.size()];
          std::string primary = followup_label(d.name, name);
          std::string answer = canonical_followup_answer(d, name, values);
          push_turn(primary, {}, answer, "q " + primary);
          asked.emplace_back(std::move(primary), std::move(answer));
        } else {
          push_turn(retrieved_capability(d.name), {}, anchor_answer, anchor_answer);
        }
      }
    }
    corpus.sessions.push_back(std::move(session));
  }
  return corpus;
}

SynthWorld synth_world(const SynthParams& params, std::uint64_t seed) {
  validate_params(params);
  SynthWorld world;
  world.corpus = synth_corpus(params, seed);

  HypergraphBuilder b;
  std::vector<std::string> forbidden;
  for (const auto& d : params.domains) {
    std::vector<std::string> slot_tokens;
    std::vector<std::string> all_slots = d.query_slots;
    all_slots.insert(all_slots.end(), d.booking_slots.begin(), d.booking_slots.end());
    all_slots.push_back(kRushSlot);
    for (const auto& slot : all_slots) {
      std::string token = slot_capability(d.name, slot);
      b.add_node(token);
      // Projection arcs: value-level capabilities imply their slot token.
      if (slot == kRushSlot) {
        b.add_arc({token + "-" + kRushValue}, {token}, 1.0, ArcKind::Manual);
      } else {
        for (std::size_t vi = 0; vi < d.values_per_slot; ++vi)
          b.add_arc({token + "-" + value_pool()[vi]}, {token}, 1.0, ArcKind::Manual);
      }
    }
    std::vector<std::string> query_tokens;
    for (const auto& slot : d.query_slots)
      query_tokens.push_back(slot_capability(d.name, slot));
    b.add_arc(query_tokens, {retrieved_capability(d.name)}, d.retrieval_rate,
              ArcKind::TypeA);
    for (const auto& name : d.followup_caps)
      b.add_arc({retrieved_capability(d.name)}, {followup_label(d.name, name)}, 1.0,
                ArcKind::Manual);
    if (!d.booking_slots.empty()) {
      std::vector<std::string> booking_sources{retrieved_capability(d.name)};
      for (const auto& slot : d.booking_slots)
        booking_sources.push_back(slot_capability(d.name, slot));
      b.add_arc(booking_sources, {booked_capability(d.name)}, d.booking_rate,
                ArcKind::TypeB);
    }
    // The risky pattern: a rushed request commits without verification.
    b.add_arc({slot_capability(d.name, d.query_slots.front()),
               slot_capability(d.name, kRushSlot)},
              {unverified_label(d.name)}, 1.0, ArcKind::Manual);
    forbidden.push_back(unverified_label(d.name));
  }
  world.graph = b.build();
  world.forbidden = world.graph.make_forbidden(forbidden);

  for (const auto& d : params.domains) {
    std::string anchor_tpl = d.name + " options found:";
    for (const auto& slot : d.query_slots)
      anchor_tpl += " " + slot + " {" + slot_capability(d.name, slot) + "}";
    world.templates[retrieved_capability(d.name)] = anchor_tpl;
    for (const auto& name : d.followup_caps) {
      world.templates[followup_label(d.name, name)] =
          d.name + " info " + name + ": yes for " + d.query_slots.front() + " {" +
          slot_capability(d.name, d.query_slots.front()) + "}";
    }
    if (!d.booking_slots.empty()) {
      std::string booked_tpl = d.name + " booked:";
      for (const auto& slot : d.booking_slots)
        booked_tpl += " " + slot + " {" + slot_capability(d.name, slot) + "}";
      world.templates[booked_capability(d.name)] = booked_tpl;
    }
  }
  return world;
}

Corpus inject_slot_omission(const Corpus& corpus, double r, std::uint64_t seed) {
  if (!(r >= 0.0 && r <= 1.0)) throw InputError("omission rate outside [0,1]");
  Rng rng(seed);
  Corpus out = corpus;
  for (auto& session : out.sessions) {
    // Collect every (domain, slot) seen in the session, in sorted order.
    std::map<std::string, std::vector<std::string>> seen;
    for (const auto& t : session.turns)
      for (const auto& [d, slots] : t.belief_state)
        for (const auto& [s, v] : slots) {
          auto& list = seen[d];
          if (std::find(list.begin(), list.end(), s) == list.end()) list.push_back(s);
        }
    for (auto& [d, slots] : seen) std::sort(slots.begin(), slots.end());

    for (const auto& [d, slots] : seen) {
      for (const auto& s : slots) {
        if (!rng.bernoulli(r)) continue;
        for (auto& t : session.turns) {
          auto dit = t.belief_state.find(d);
          if (dit == t.belief_state.end()) continue;
          dit->second.erase(s);
          if (dit->second.empty()) t.belief_state.erase(dit);
        }
      }
    }
  }
  return out;
}

}  // namespace cas
