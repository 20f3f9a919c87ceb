#pragma once

#include <map>
#include <string>
#include <vector>

namespace cas {

struct CrossDomainPattern {
  std::vector<std::string> sources;  // capability labels
  std::string target;
  double rate = 1.0;  // seed rate, used when the corpus has nothing to count
};

/// Domain ontology driving extraction and the synthetic generator. Slot
/// capability labels are "<domain>-<slot>"; outcome labels are
/// "<domain>-candidates-retrieved" and "<domain>-booked".
struct Ontology {
  std::vector<std::string> domains;
  std::map<std::string, std::vector<std::string>> informable_slots;
  std::map<std::string, std::vector<std::string>> booking_required;
  std::vector<std::string> bookable;
  std::vector<CrossDomainPattern> cross_domain_patterns;

  void validate() const;  // booking_required within informable_slots, etc.
};

std::string slot_capability(const std::string& domain, const std::string& slot);
std::string retrieved_capability(const std::string& domain);
std::string booked_capability(const std::string& domain);

Ontology load_ontology(const std::string& path);
Ontology parse_ontology(const std::string& json_text);
std::string ontology_to_json(const Ontology& o);
void save_ontology(const std::string& path, const Ontology& o);

}  // namespace cas
