// Copyright 2026 The OTCD Authors
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

// Key-frame object management: detection succession, gallery upkeep and
// the tentative/confirmed/deleted state machine.

#pragma once

#include <algorithm>
#include <vector>

#include "otcd/association.hpp"
#include "otcd/model.hpp"

namespace otcd {

/// Matched objects take the detection box and feature (gallery capped at
/// l_f, oldest evicted); hits/misses advance for matched/unmatched objects.
inline void apply_matches(std::vector<TrackedObject>& objects,
                          const std::vector<Detection>& detections,
                          const AssignmentResult& result, int l_f) {
  for (const auto& [i, j] : result.matches) {
    TrackedObject& o = objects.at(i);
    const Detection& d = detections.at(j);
    o.bbox = d.bbox;
    o.gallery.push_back(d.feature);
    while (static_cast<int>(o.gallery.size()) > l_f) o.gallery.pop_front();
    ++o.hits;
    o.misses = 0;
  }
  for (int i : result.unmatched_objects) {
    TrackedObject& o = objects.at(i);
    ++o.misses;
    o.hits = 0;
  }
}

/// Hands out object ids; ids are never reused.
class IdAllocator {
 public:
  explicit IdAllocator(int first = 1) : next_(first) {}
  int next() { return next_++; }
  int peek() const { return next_; }

 private:
  int next_;
};

/// Runs demotion, promotion and deletion on `objects` (removing deleted
/// ones), then returns one newborn object per unmatched detection. All
/// length thresholds are strict ("more than l key frames").
inline std::vector<TrackedObject> manage_states(std::vector<TrackedObject>& objects,
                                                const std::vector<Detection>& unmatched,
                                                const TrackerConfig& cfg, IdAllocator& ids) {
  using S = LifecycleState;
  for (auto& o : objects) {
    if (o.state == S::Confirmed && o.misses > cfg.l_demote) {
      o.state = S::Tentative;
    } else if (o.state == S::Tentative) {
      if (o.hits > cfg.l_confirm)
        o.state = S::Confirmed;
      else if (o.misses > cfg.l_delete)
        o.state = S::Deleted;
    }
  }
  std::erase_if(objects, [](const TrackedObject& o) { return o.state == S::Deleted; });

  std::vector<TrackedObject> born;
  for (const auto& d : unmatched) {
    TrackedObject o;
    o.id = ids.next();
    o.bbox = d.bbox;
    o.state = d.confidence > cfg.c_confirm ? S::Confirmed : S::Tentative;
    o.gallery.push_back(d.feature);
    o.hits = 1;
    o.misses = 0;
    born.push_back(std::move(o));
  }
  return born;
}

}  // namespace otcd
