// Copyright 2026 The LSLU Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "lslu/error.hpp"

namespace lslu {

// BIO tagging helpers shared by data simulation, decoding, and evaluation.

struct BioTag {
  char kind = 'O';  // 'O', 'B', or 'I'
  std::string type;
};

inline BioTag parse_bio(const std::string& tag) {
  if (tag == "O") return {};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-')
    return {tag[0], tag.substr(2)};
  throw ValueError("malformed BIO tag '" + tag + "'");
}

struct SlotSpan {
  std::string type;
  std::size_t start = 0;  // token offsets, half-open
  std::size_t end = 0;
  friend bool operator==(const SlotSpan&, const SlotSpan&) = default;
  friend bool operator<(const SlotSpan& a, const SlotSpan& b) {
    return std::tie(a.start, a.end, a.type) < std::tie(b.start, b.end, b.type);
  }
};

/// Spans from a tag sequence. An I-X that does not continue an X span opens
/// a new span (same reading as the repair rule).
inline std::vector<SlotSpan> extract_spans(const std::vector<std::string>& tags) {
  std::vector<SlotSpan> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const BioTag t = parse_bio(tags[i]);
    if (t.kind == 'I' && open && spans.back().type == t.type) {
      spans.back().end = i + 1;
      continue;
    }
    if (t.kind == 'O') {
      open = false;
      continue;
    }
    spans.push_back({t.type, i, i + 1});
    open = true;
  }
  return spans;
}

inline bool bio_well_formed(const std::vector<std::string>& tags) {
  std::string prev_type;
  bool open = false;
  for (const auto& s : tags) {
    BioTag t;
    try {
      t = parse_bio(s);
    } catch (const ValueError&) {
      return false;
    }
    if (t.kind == 'I' && (!open || prev_type != t.type)) return false;
    open = t.kind != 'O';
    prev_type = t.type;
  }
  return true;
}

/// Orphan I-X (not preceded by B-X or I-X) becomes B-X.
inline std::vector<std::string> repair_bio(std::vector<std::string> tags) {
  std::string prev_type;
  bool open = false;
  for (auto& s : tags) {
    BioTag t = parse_bio(s);
    if (t.kind == 'I' && (!open || prev_type != t.type)) {
      s = "B-" + t.type;
      t.kind = 'B';
    }
    open = t.kind != 'O';
    prev_type = t.type;
  }
  return tags;
}

/// Intent and slot label inventories for one domain. Slot labels are BIO
/// strings; "O" is always label 0.
struct DomainSchema {
  std::string domain;
  std::vector<std::string> intents;
  std::vector<std::string> slot_labels;

  static DomainSchema from_types(std::string domain, std::vector<std::string> intents,
                                 const std::vector<std::string>& slot_types) {
    DomainSchema s{std::move(domain), std::move(intents), {"O"}};
    for (const auto& t : slot_types) {
      s.slot_labels.push_back("B-" + t);
      s.slot_labels.push_back("I-" + t);
    }
    s.validate();
    return s;
  }

  void validate() const {
    if (intents.empty()) throw ConfigError("schema: no intents");
    if (std::count(slot_labels.begin(), slot_labels.end(), "O") != 1)
      throw ConfigError("schema: slot labels must contain O exactly once");
    if (std::set<std::string>(intents.begin(), intents.end()).size() != intents.size())
      throw ConfigError("schema: duplicate intent label");
    if (std::set<std::string>(slot_labels.begin(), slot_labels.end()).size() !=
        slot_labels.size())
      throw ConfigError("schema: duplicate slot label");
    for (const auto& l : slot_labels) {
      BioTag t;
      try {
        t = parse_bio(l);
      } catch (const ValueError& e) {
        throw ConfigError(std::string("schema: ") + e.what());
      }
      if (t.kind == 'B' &&
          std::find(slot_labels.begin(), slot_labels.end(), "I-" + t.type) == slot_labels.end())
        throw ConfigError("schema: " + l + " has no matching I-" + t.type);
      if (t.kind == 'I' &&
          std::find(slot_labels.begin(), slot_labels.end(), "B-" + t.type) == slot_labels.end())
        throw ConfigError("schema: " + l + " has no matching B-" + t.type);
    }
  }

  std::size_t n_intents() const { return intents.size(); }
  std::size_t n_slots() const { return slot_labels.size(); }

  int intent_id(const std::string& intent) const {
    auto it = std::find(intents.begin(), intents.end(), intent);
    if (it == intents.end()) throw ValueError("schema: unknown intent '" + intent + "'");
    return static_cast<int>(it - intents.begin());
  }
  int slot_id(const std::string& label) const {
    auto it = std::find(slot_labels.begin(), slot_labels.end(), label);
    if (it == slot_labels.end()) throw ValueError("schema: unknown slot label '" + label + "'");
    return static_cast<int>(it - slot_labels.begin());
  }

  /// Line-oriented form with [intents] and [slots] sections.
  std::string serialize() const {
    std::ostringstream os;
    os << "[intents]\n";
    for (const auto& i : intents) os << i << '\n';
    os << "[slots]\n";
    for (const auto& s : slot_labels) os << s << '\n';
    return os.str();
  }

  static DomainSchema parse(std::istream& is, std::string domain = {}) {
    DomainSchema s;
    s.domain = std::move(domain);
    enum { none, intents, slots } section = none;
    std::size_t lineno = 0;
    for (std::string line; std::getline(is, line);) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto b = line.find_first_not_of(" \t");
      if (b == std::string::npos || line[b] == '#') continue;
      line = line.substr(b, line.find_last_not_of(" \t") - b + 1);
      if (line == "[intents]") {
        section = intents;
      } else if (line == "[slots]") {
        section = slots;
      } else if (section == intents) {
        s.intents.push_back(line);
      } else if (section == slots) {
        s.slot_labels.push_back(line);
      } else {
        throw ConfigError("schema line " + std::to_string(lineno) + ": label outside a section");
      }
    }
    s.validate();
    return s;
  }

  static DomainSchema load(const std::string& path, std::string domain = {}) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read schema " + path);
    return parse(is, std::move(domain));
  }

  friend bool operator==(const DomainSchema&, const DomainSchema&) = default;
};

}  // namespace lslu
