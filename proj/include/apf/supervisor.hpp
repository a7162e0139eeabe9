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

#include <optional>

// Mode supervision: position control far from the hand, avoidance inside
// the avoidance band, free drive when the hand gets critically close, with
// a hysteresis band between activation and deactivation of free drive.
namespace apf::supervisor {

struct Thresholds {
  double d_at = 0.2;   // avoidance threshold
  double d_act = 0.1;  // free-drive activation
  double d_dct = 0.2;  // free-drive deactivation

  void validate() const {
    if (!(d_act > 0.0) || !std::isfinite(d_act))
      throw ValidationError("thresholds.d_act_m", "must be > 0");
    if (!(d_dct > d_act) || !std::isfinite(d_dct))
      throw ValidationError("thresholds.d_dct_m", "d_DCT > d_ACT required");
    if (!(d_at > d_act) || !std::isfinite(d_at))
      throw ValidationError("thresholds.d_at_m", "d_AT > d_ACT required");
  }

  bool operator==(const Thresholds&) const = default;
};

inline Mode step_mode(Mode prev, double d_ro, ObstacleKind kind, const Thresholds& th) {
  if (prev == Mode::FreeDrive && d_ro <= th.d_dct) return Mode::FreeDrive;
  if (d_ro < th.d_act) return Mode::FreeDrive;
  if (d_ro < th.d_at)
    return kind == ObstacleKind::Type1Imminent ? Mode::AvoidType1 : Mode::AvoidType2;
  return Mode::Position;
}

/// Simulated free drive: hold still, or follow the operator's drag velocity
/// scaled by the compliance and capped at v_max.
inline Vec3 free_drive_update(const Vec3& /*x_r*/, const std::optional<Vec3>& hand_drag,
                              double compliance, double v_max) {
  if (!hand_drag) return Vec3::Zero();
  Vec3 v = compliance * *hand_drag;
  const double n = v.norm();
  if (n > v_max) v *= v_max / n;
  return v;
}

}  // namespace apf::supervisor
