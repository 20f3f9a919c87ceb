#include "cas/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cas/errors.hpp"
#include "json.hpp"

namespace cas {

void Ontology::validate() const {
  for (const auto& [domain, slots] : booking_required) {
    auto it = informable_slots.find(domain);
    if (it == informable_slots.end())
      throw InputError("ontology: booking_required for unknown domain " + domain);
    for (const auto& s : slots) {
      if (std::find(it->second.begin(), it->second.end(), s) == it->second.end())
        throw InputError("ontology: booking slot " + s +
                         " not informable in domain " + domain);
    }
  }
  for (const auto& d : bookable)
    if (std::find(domains.begin(), domains.end(), d) == domains.end())
      throw InputError("ontology: bookable lists unknown domain " + d);
  for (const auto& [domain, slots] : informable_slots)
    if (std::find(domains.begin(), domains.end(), domain) == domains.end())
      throw InputError("ontology: informable_slots for unknown domain " + domain);
}

std::string slot_capability(const std::string& domain, const std::string& slot) {
  return domain + "-" + slot;
}

std::string retrieved_capability(const std::string& domain) {
  return domain + "-candidates-retrieved";
}

std::string booked_capability(const std::string& domain) {
  return domain + "-booked";
}

Ontology parse_ontology(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("ontology parse error: ") + e.what());
  }
  Ontology o;
  o.domains = j.value("domains", std::vector<std::string>{});
  if (j.contains("informable_slots"))
    for (auto it = j["informable_slots"].begin(); it != j["informable_slots"].end(); ++it)
      o.informable_slots[it.key()] = it.value().get<std::vector<std::string>>();
  if (j.contains("booking_required"))
    for (auto it = j["booking_required"].begin(); it != j["booking_required"].end(); ++it)
      o.booking_required[it.key()] = it.value().get<std::vector<std::string>>();
  o.bookable = j.value("bookable", std::vector<std::string>{});
  if (j.contains("cross_domain_patterns")) {
    for (const auto& p : j["cross_domain_patterns"]) {
      CrossDomainPattern c;
      c.sources = p.at("sources").get<std::vector<std::string>>();
      c.target = p.at("target").get<std::string>();
      c.rate = p.value("rate", 1.0);
      o.cross_domain_patterns.push_back(std::move(c));
    }
  }
  o.validate();
  return o;
}

Ontology load_ontology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ontology file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ontology(ss.str());
}

std::string ontology_to_json(const Ontology& o) {
  nlohmann::ordered_json j;
  j["domains"] = o.domains;
  j["informable_slots"] = nlohmann::ordered_json::object();
  for (const auto& [d, s] : o.informable_slots) j["informable_slots"][d] = s;
  j["booking_required"] = nlohmann::ordered_json::object();
  for (const auto& [d, s] : o.booking_required) j["booking_required"][d] = s;
  j["bookable"] = o.bookable;
  j["cross_domain_patterns"] = nlohmann::ordered_json::array();
  for (const auto& p : o.cross_domain_patterns) {
    j["cross_domain_patterns"].push_back(
        {{"sources", p.sources}, {"target", p.target}, {"rate", p.rate}});
  }
  return j.dump(2) + "\n";
}

void save_ontology(const std::string& path, const Ontology& o) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write ontology file: " + path);
  out << ontology_to_json(o);
}

}  // namespace cas
