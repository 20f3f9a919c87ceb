#pragma once

#include <string>
#include <vector>

#include "cas/corpus.hpp"

namespace cas {

/// System dialogue-act names (lowercased, domain prefix stripped) signalling
/// each outcome. The dataset's conventions vary across releases, so the
/// mapping ships as configuration with this documented default:
/// inform/recommend/select/offerbook mark search results as retrieved,
/// book/offerbooked mark a completed booking.
struct MultiwozActMap {
  std::vector<std::string> retrieved_acts = {"inform", "recommend", "select",
                                             "offerbook"};
  std::vector<std::string> booked_acts = {"book", "offerbooked"};
};

struct MultiwozOptions {
  /// Subdirectory to load when `path` is the dataset root ("train", "dev",
  /// "test"); empty loads JSON files beside `path` itself.
  std::string split;
  /// Optional dialog_acts.json; when empty, a sibling file of that name is
  /// used if present.
  std::string acts_path;
  MultiwozActMap act_map;
};

/// Best-effort adapter for the published MultiWOZ 2.2 JSON layout. Belief
/// states map through frames[].state.slot_values; outcomes come from system
/// dialogue acts via the act map. The native corpus schema remains the
/// source of truth; adapted corpora carry a provenance tag.
Corpus load_multiwoz(const std::string& path, const MultiwozOptions& options = {});

}  // namespace cas
