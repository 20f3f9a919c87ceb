#include "cas/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cas/errors.hpp"
#include "cas/rng.hpp"
#include "json.hpp"

namespace cas {

TemplateDb TemplateDb::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open template file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("template file parse error: ") + e.what());
  }
  if (!j.is_object()) throw InputError("template file must be a JSON object");
  std::map<std::string, std::string> m;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string())
      throw InputError("template for " + it.key() + " must be a string");
    m[it.key()] = it.value().get<std::string>();
  }
  return TemplateDb(std::move(m));
}

void TemplateDb::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write template file: " + path);
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : templates_) j[k] = v;
  out << j.dump(2) << "\n";
}

const std::string* TemplateDb::find(const std::string& capability) const {
  auto it = templates_.find(capability);
  return it == templates_.end() ? nullptr : &it->second;
}

TemplateDb TemplateDb::with_coverage(double p, std::uint64_t seed) const {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("coverage p outside [0,1]");
  std::size_t keep = static_cast<std::size_t>(p * static_cast<double>(templates_.size()));
  std::vector<std::string> keys;
  keys.reserve(templates_.size());
  for (const auto& [k, v] : templates_) keys.push_back(k);  // sorted (map order)
  Rng rng(seed);
  rng.shuffle(keys);
  std::map<std::string, std::string> kept;
  for (std::size_t i = 0; i < keep; ++i) kept[keys[i]] = templates_.at(keys[i]);
  return TemplateDb(std::move(kept));
}

RenderResult render_template(const TemplateDb& tdb, const std::string& capability,
                             const std::map<std::string, std::string>& facts) {
  const std::string* tpl = tdb.find(capability);
  if (!tpl) throw MissingTemplate("no template for capability: " + capability);
  RenderResult out;
  const std::string& t = *tpl;
  std::size_t i = 0;
  while (i < t.size()) {
    if (t[i] != '{') {
      out.text.push_back(t[i++]);
      continue;
    }
    std::size_t close = t.find('}', i);
    if (close == std::string::npos) {  // unbalanced brace: emit literally
      out.text.append(t.substr(i));
      break;
    }
    std::string slot = t.substr(i + 1, close - i - 1);
    auto it = facts.find(slot);
    if (it != facts.end()) {
      out.text.append(it->second);
    } else {
      out.text.append("{" + slot + ":unknown}");
      out.unresolved.push_back(slot);
    }
    i = close + 1;
  }
  return out;
}

std::map<std::string, std::string> closure_facts(const Hypergraph& h,
                                                 const NodeSet& members) {
  // Three passes, strongest source first (first writer wins within a pass):
  //   1. value children: member "d-s-v" whose prefix "d-s" is itself a member
  //      binds facts["d-s"] = "v";
  //   2. every member label binds itself to "yes";
  //   3. prefix splits of members whose prefix is not a member fill leftover
  //      keys (harmless for templates, which only name real slots).
  std::map<std::string, std::string> facts;
  auto split = [](const std::string& label) -> std::pair<std::string, std::string> {
    std::size_t cut = label.rfind('-');
    if (cut == std::string::npos || cut == 0 || cut + 1 >= label.size()) return {"", ""};
    return {label.substr(0, cut), label.substr(cut + 1)};
  };
  for (NodeId id : members) {
    auto [prefix, tail] = split(h.label(id));
    if (prefix.empty()) continue;
    auto p = h.find_node(prefix);
    if (p && set_contains(members, *p) && facts.count(prefix) == 0)
      facts[prefix] = tail;
  }
  for (NodeId id : members) facts.emplace(h.label(id), "yes");
  for (NodeId id : members) {
    auto [prefix, tail] = split(h.label(id));
    if (prefix.empty()) continue;
    facts.emplace(prefix, tail);
  }
  return facts;
}

std::uint64_t CasStore::put(CasEntry entry) {
  entry.emb = embed(entry.answer);
  entries_.push_back(std::move(entry));
  return entries_.size() - 1;
}

std::vector<std::size_t> CasStore::approx_filter(const Embedding& query,
                                                 std::size_t top) const {
  if (top < 1) throw InputError("approx_filter requires top >= 1");
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i)
    ranked.emplace_back(cosine(entries_[i].emb, query), i);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (ranked.size() > top) ranked.resize(top);
  std::vector<std::size_t> ids;
  ids.reserve(ranked.size());
  for (const auto& [sim, id] : ranked) ids.push_back(id);
  return ids;
}

std::optional<CasHit> cas_lookup(const CasStore& store, const Embedding& query,
                                 const NodeSet& c_t, const ForbiddenSet& f,
                                 const LookupPolicy& policy, const Hypergraph* h) {
  if (store.size() == 0) return std::nullopt;
  for (std::size_t id : store.approx_filter(query, store.size())) {
    const CasEntry& e = store.entry(id);
    if (cosine(e.emb, query) < policy.sim_floor) break;  // ranked: rest are lower
    if (!is_subset(e.witness.members, c_t)) continue;
    if (policy.refined_invalidation && h != nullptr) {
      NodeSet added = set_difference(f.members, e.f_snap.members);
      if (!added.empty() && intersects(closure(*h, e.witness.members), added))
        continue;
    } else if (e.f_snap.members != f.members) {
      continue;
    }
    return CasHit{id, e.answer, e.cert};
  }
  return std::nullopt;
}

std::vector<PabEntry> build_pab(const Hypergraph& h, const NodeSet& a_t,
                                const NodeSet& cl_at, const ForbiddenSet& f,
                                const Certificate& cert_main,
                                const TemplateDb& tdb) {
  if (intersects(cl_at, f.members))
    throw RefusalError("build_pab refused: closure intersects the forbidden set");
  std::vector<PabEntry> out;
  auto facts = closure_facts(h, cl_at);
  for (NodeId v : set_difference(cl_at, a_t)) {
    if (set_contains(f.members, v)) continue;
    const std::string& label = h.label(v);
    if (!tdb.has(label)) continue;
    MinimizedDerivation d = minimize_derivation(h, cert_main, v);
    RenderResult r = render_template(tdb, label, facts);
    out.push_back(PabEntry{v, std::move(r.text), std::move(d.witness),
                           std::move(d.cert), std::move(r.unresolved)});
  }
  return out;
}

namespace {

nlohmann::ordered_json cert_to_json(const Certificate& c, const Hypergraph& h) {
  nlohmann::ordered_json j;
  j["base"] = h.labels_of(c.base);
  j["firings"] = c.firings;
  j["version"] = c.graph_version;
  return j;
}

Certificate cert_from_json(const nlohmann::json& j, const Hypergraph& h) {
  Certificate c;
  c.base = h.resolve(j.at("base").get<std::vector<std::string>>());
  c.firings = j.at("firings").get<std::vector<ArcId>>();
  c.graph_version = j.at("version").get<std::uint64_t>();
  return c;
}

nlohmann::ordered_json pab_to_json(const PabEntry& p, const Hypergraph& h) {
  nlohmann::ordered_json j;
  j["capability"] = h.label(p.capability);
  j["answer"] = p.answer;
  j["witness"] = h.labels_of(p.witness.members);
  j["cert"] = cert_to_json(p.cert, h);
  j["unresolved"] = p.unresolved;
  return j;
}

PabEntry pab_from_json(const nlohmann::json& j, const Hypergraph& h) {
  PabEntry p;
  p.capability = h.node(j.at("capability").get<std::string>());
  p.answer = j.at("answer").get<std::string>();
  p.witness.members = h.resolve(j.at("witness").get<std::vector<std::string>>());
  p.cert = cert_from_json(j.at("cert"), h);
  p.unresolved = j.at("unresolved").get<std::vector<std::string>>();
  return p;
}

}  // namespace

std::string cas_to_jsonl(const CasStore& store, const Hypergraph& h) {
  std::ostringstream os;
  for (const auto& e : store.entries()) {
    nlohmann::ordered_json j;
    j["answer"] = e.answer;
    j["witness"] = h.labels_of(e.witness.members);
    j["pab"] = nlohmann::ordered_json::array();
    for (const auto& p : e.pab) j["pab"].push_back(pab_to_json(p, h));
    j["f_snap"] = {{"members", h.labels_of(e.f_snap.members)},
                   {"version", e.f_snap.version}};
    j["cert"] = cert_to_json(e.cert, h);
    j["t_store"] = e.t_store;
    os << j.dump() << "\n";
  }
  return os.str();
}

CasStore cas_from_jsonl(const std::string& text, const Hypergraph& h) {
  CasStore store;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("cas dump line " + std::to_string(lineno) + ": " + e.what());
    }
    CasEntry e;
    e.answer = j.at("answer").get<std::string>();
    e.witness.members = h.resolve(j.at("witness").get<std::vector<std::string>>());
    for (const auto& p : j.at("pab")) e.pab.push_back(pab_from_json(p, h));
    e.f_snap.members = h.resolve(j.at("f_snap").at("members").get<std::vector<std::string>>());
    e.f_snap.version = j.at("f_snap").at("version").get<std::uint64_t>();
    e.cert = cert_from_json(j.at("cert"), h);
    e.t_store = j.at("t_store").get<std::uint64_t>();
    store.put(std::move(e));
  }
  return store;
}

void save_cas(const std::string& path, const CasStore& store, const Hypergraph& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write cas dump: " + path);
  out << cas_to_jsonl(store, h);
}

CasStore load_cas(const std::string& path, const Hypergraph& h) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cas dump: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return cas_from_jsonl(ss.str(), h);
}

}  // namespace cas
