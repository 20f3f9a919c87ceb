#include "cas/multiwoz.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cas/errors.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace cas {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open file: " + p.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("parse error in " + p.string() + ": " + e.what());
  }
  return j;
}

std::vector<fs::path> dialogue_files(const std::string& path, const std::string& split) {
  fs::path root(path);
  if (fs::is_regular_file(root)) return {root};
  if (!fs::is_directory(root)) throw IoError("no such corpus path: " + path);
  fs::path dir = root;
  if (!split.empty()) {
    if (fs::is_directory(root / split)) dir = root / split;
    else throw IoError("split directory not found: " + (root / split).string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json") continue;
    if (name == "dialog_acts.json" || name == "schema.json") continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no dialogue files under: " + dir.string());
  return files;
}

bool act_in(const std::vector<std::string>& acts, const std::string& act) {
  return std::find(acts.begin(), acts.end(), act) != acts.end();
}

// "Hotel-Inform" -> {"hotel", "inform"}; acts without a domain dash map to
// {"", act}.
std::pair<std::string, std::string> split_act(const std::string& key) {
  auto dash = key.find('-');
  if (dash == std::string::npos) return {"", lower(key)};
  return {lower(key.substr(0, dash)), lower(key.substr(dash + 1))};
}

}  // namespace

Corpus load_multiwoz(const std::string& path, const MultiwozOptions& options) {
  std::vector<fs::path> files = dialogue_files(path, options.split);

  // Acts are keyed by dialogue id and turn id in a sibling file.
  nlohmann::json acts;
  fs::path acts_file = options.acts_path.empty()
                           ? files.front().parent_path() / "dialog_acts.json"
                           : fs::path(options.acts_path);
  if (options.acts_path.empty() && !fs::exists(acts_file)) {
    fs::path parent = files.front().parent_path().parent_path() / "dialog_acts.json";
    if (fs::exists(parent)) acts_file = parent;
  }
  if (fs::exists(acts_file)) acts = read_json(acts_file);

  Corpus corpus;
  corpus.ontology_ref = path;
  corpus.provenance.kind = CorpusKind::Multiwoz;
  corpus.provenance.params = "adapter: best-effort act mapping";

  for (const auto& file : files) {
    nlohmann::json dialogues = read_json(file);
    if (!dialogues.is_array())
      throw InputError("multiwoz file is not a dialogue array: " + file.string());
    for (const auto& d : dialogues) {
      DialogueSession session;
      session.session_id = d.value("dialogue_id", std::string("unknown"));
      const auto& turns = d.value("turns", nlohmann::json::array());

      std::map<std::string, std::map<std::string, std::string>> belief;
      std::string last_domain;
      std::string last_new_slot_token;
      std::uint32_t out_id = 0;
      Turn pending;  // built on USER turns, finalized when SYSTEM replies
      bool have_pending = false;

      auto acts_for = [&](const std::string& turn_id) -> nlohmann::json {
        if (acts.contains(session.session_id) &&
            acts[session.session_id].contains(turn_id))
          return acts[session.session_id][turn_id].value("dialog_act",
                                                         nlohmann::json::object());
        return nlohmann::json::object();
      };

      for (const auto& t : turns) {
        std::string speaker = t.value("speaker", std::string());
        if (speaker == "USER") {
          for (const auto& frame : t.value("frames", nlohmann::json::array())) {
            std::string service = lower(frame.value("service", std::string()));
            if (!frame.contains("state")) continue;
            const auto& sv = frame["state"].value("slot_values", nlohmann::json::object());
            for (auto it = sv.begin(); it != sv.end(); ++it) {
              std::string key = it.key();  // "hotel-area"
              auto dash = key.find('-');
              if (dash == std::string::npos) continue;
              std::string domain = lower(key.substr(0, dash));
              std::string slot = normalize_token(key.substr(dash + 1));
              if (it.value().empty() || !it.value().is_array()) continue;
              std::string value = normalize_token(it.value().front().get<std::string>());
              if (value.empty()) continue;
              auto& slot_map = belief[domain];
              if (slot_map.count(slot) == 0 || slot_map[slot] != value) {
                last_new_slot_token = domain + "-" + slot;
                last_domain = domain;
              }
              slot_map[slot] = value;
            }
            if (!service.empty()) last_domain = service;
          }
          pending = Turn{};
          pending.turn_id = out_id++;
          pending.belief_state = belief;
          have_pending = true;
        } else if (speaker == "SYSTEM" && have_pending) {
          nlohmann::json act_obj = t.contains("dialog_act")
                                       ? t["dialog_act"]
                                       : acts_for(t.value("turn_id", std::string()));
          std::vector<std::string> outcomes;
          for (auto it = act_obj.begin(); it != act_obj.end(); ++it) {
            auto [domain, act] = split_act(it.key());
            if (domain.empty() || domain == "general") domain = last_domain;
            if (domain.empty() || domain == "general" || domain == "booking")
              domain = last_domain;
            if (domain.empty()) continue;
            if (act_in(options.act_map.booked_acts, act))
              outcomes.push_back(booked_capability(domain));
            else if (act_in(options.act_map.retrieved_acts, act))
              outcomes.push_back(retrieved_capability(domain));
          }
          std::sort(outcomes.begin(), outcomes.end());
          outcomes.erase(std::unique(outcomes.begin(), outcomes.end()), outcomes.end());
          pending.outcomes = outcomes;
          if (!outcomes.empty())
            pending.primary_capability = outcomes.front();
          else if (!last_new_slot_token.empty())
            pending.primary_capability = last_new_slot_token;
          else
            pending.primary_capability =
                last_domain.empty() ? "general" : retrieved_capability(last_domain);
          pending.answer_text = t.value("utterance", std::string());
          session.turns.push_back(pending);
          have_pending = false;
        }
      }
      if (have_pending) {
        pending.primary_capability = last_new_slot_token.empty()
                                         ? (last_domain.empty()
                                                ? "general"
                                                : retrieved_capability(last_domain))
                                         : last_new_slot_token;
        session.turns.push_back(pending);
      }
      if (!session.turns.empty()) corpus.sessions.push_back(std::move(session));
    }
  }
  return corpus;
}

}  // namespace cas
