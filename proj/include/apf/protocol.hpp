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

#include <apf/common.hpp>
#include <apf/modes.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>

// Wire protocol of the live bridge: one JSON object per text frame.
namespace apf::protocol {

inline constexpr double kMaxHandNorm = 10.0;

struct StateMessage {
  double t = 0.0;
  std::array<double, 6> q{};
  std::array<double, 3> tcp{};
  std::array<double, 3> v{};
  std::string mode = "position";
  std::array<double, 3> hand{};
  double d_ro = 0.0;
  std::array<double, 3> forces{};

  bool operator==(const StateMessage&) const = default;
};

struct HandMessage {
  std::array<double, 3> pos{};
  std::optional<std::array<double, 3>> drag;

  bool operator==(const HandMessage&) const = default;

  Vec3 position() const { return {pos[0], pos[1], pos[2]}; }
  std::optional<Vec3> drag_vector() const {
    if (!drag) return std::nullopt;
    return Vec3((*drag)[0], (*drag)[1], (*drag)[2]);
  }
};

using Message = std::variant<StateMessage, HandMessage>;

inline void validate(const HandMessage& m) {
  for (double c : m.pos)
    if (!std::isfinite(c)) throw ValidationError("pos", "coordinates must be finite");
  if (std::hypot(m.pos[0], m.pos[1], m.pos[2]) > kMaxHandNorm)
    throw ValidationError("pos", "norm must be <= 10 m");
  if (m.drag)
    for (double c : *m.drag)
      if (!std::isfinite(c)) throw ValidationError("drag", "components must be finite");
}

inline nlohmann::json to_json(const StateMessage& m) {
  return {{"type", "state"}, {"t", m.t},       {"q", m.q},       {"tcp", m.tcp},
          {"v", m.v},        {"mode", m.mode}, {"hand", m.hand}, {"d_ro", m.d_ro},
          {"forces", m.forces}};
}

inline nlohmann::json to_json(const HandMessage& m) {
  nlohmann::json j{{"type", "hand"}, {"pos", m.pos}};
  if (m.drag) j["drag"] = *m.drag;
  return j;
}

inline std::string serialize(const Message& m) {
  return std::visit([](const auto& v) { return to_json(v).dump(); }, m);
}

namespace detail {

template <std::size_t N>
std::array<double, N> numbers(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != N)
    throw ParseError(std::string("field '") + key + "' must be an array of " + std::to_string(N) +
                         " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!(*it)[i].is_number()) throw ParseError(std::string("field '") + key + "' holds a non-number");
    out[i] = (*it)[i].get<double>();
  }
  return out;
}

inline double number(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw ParseError(std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

}  // namespace detail

/// Parses one frame. Unknown fields are ignored; `type` is mandatory.
/// Hand messages are validated as well as parsed.
inline Message parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!j.is_object()) throw ParseError("frame must be a JSON object");
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) throw ParseError("missing 'type' field");

  if (*type == "hand") {
    HandMessage m;
    m.pos = detail::numbers<3>(j, "pos");
    if (j.contains("drag") && !j["drag"].is_null()) m.drag = detail::numbers<3>(j, "drag");
    validate(m);
    return m;
  }
  if (*type == "state") {
    StateMessage m;
    m.t = detail::number(j, "t");
    m.q = detail::numbers<6>(j, "q");
    m.tcp = detail::numbers<3>(j, "tcp");
    m.v = detail::numbers<3>(j, "v");
    const auto mode = j.find("mode");
    if (mode == j.end() || !mode->is_string() || !mode_from_string(mode->get<std::string>()))
      throw ParseError("field 'mode' must be one of position | avoid1 | avoid2 | freedrive");
    m.mode = mode->get<std::string>();
    m.hand = detail::numbers<3>(j, "hand");
    m.d_ro = detail::number(j, "d_ro");
    m.forces = detail::numbers<3>(j, "forces");
    return m;
  }
  throw ParseError("unknown message type '" + type->get<std::string>() + "'");
}

inline HandMessage parse_hand(const std::string& text) {
  auto m = parse(text);
  if (auto* h = std::get_if<HandMessage>(&m)) return *h;
  throw ParseError("expected a hand message");
}

}  // namespace apf::protocol
