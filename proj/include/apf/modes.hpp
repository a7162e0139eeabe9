// Copyright 2026 The apfsim Authors
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

#include <optional>
#include <string_view>

namespace apf {

// Behavior-tree leaves. Exactly one is active per control tick.
enum class Mode { Position, AvoidType1, AvoidType2, FreeDrive };

enum class ObstacleKind { Type1Imminent, Type2NonImminent };

constexpr std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Position: return "position";
    case Mode::AvoidType1: return "avoid1";
    case Mode::AvoidType2: return "avoid2";
    case Mode::FreeDrive: return "freedrive";
  }
  return "position";
}

constexpr std::string_view to_string(ObstacleKind k) {
  return k == ObstacleKind::Type1Imminent ? "type1" : "type2";
}

constexpr std::optional<Mode> mode_from_string(std::string_view s) {
  if (s == "position") return Mode::Position;
  if (s == "avoid1") return Mode::AvoidType1;
  if (s == "avoid2") return Mode::AvoidType2;
  if (s == "freedrive") return Mode::FreeDrive;
  return std::nullopt;
}

constexpr bool is_avoidance(Mode m) { return m == Mode::AvoidType1 || m == Mode::AvoidType2; }

}  // namespace apf
