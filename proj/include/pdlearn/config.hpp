// Copyright 2026 The pdlearn Authors
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

#include <cstdint>
#include <string>

namespace pdlearn {

enum class FadingKind { GammaNt, Exponential };

std::string to_string(FadingKind k);

/// Physical and protocol constants. Defaults are the reference downlink URLLC
/// setup (0.1 ms slots, 1 ms delay bound, 1e-5 loss, 43 dBm, -173 dBm/Hz).
struct SystemConfig {
  double slot_duration_Ts = 1e-4;   // s
  double tx_duration_tau = 5e-5;    // s
  int dl_delay_bound_Dmax = 10;     // slots
  int tx_delay_Dt = 1;              // slots
  int dec_delay_Dc = 1;             // slots
  double eps_max = 1e-5;
  double packet_bits_u = 160.0;
  double arrival_rate_a = 0.2;      // packets/slot
  double P_max = 19.952623149688797;  // W (43 dBm)
  double W_max = 20e6;              // Hz
  double N0 = 5.011872336272725e-21;  // W/Hz (-173 dBm/Hz)
  int num_antennas_Nt = 8;
  double pathloss_offset_dB = 35.3;
  double pathloss_slope_dB = 37.6;  // per decade of distance in meters
  double cell_min_dist = 50.0;      // m
  double cell_max_dist = 250.0;     // m
  FadingKind fading_kind = FadingKind::GammaNt;

  /// Queueing share of the delay bound, Dmax - Dt - Dc (slots).
  int queue_delay_bound() const { return dl_delay_bound_Dmax - tx_delay_Dt - dec_delay_Dc; }
  /// Fixed spectral density P_max / W_max used when power does not adapt.
  double power_density() const { return P_max / W_max; }
  /// Mean of the small-scale gain under fading_kind.
  double fading_mean() const;

  /// Throws ConfigError on violated invariants.
  void validate() const;

  /// Flat "key = value" rendering, readable by parse_config.
  std::string to_text() const;
  /// FNV-1a hash of to_text(), used to tag checkpoints and manifests.
  std::uint64_t hash() const;
};

/// Parses a flat TOML-style document of "key = value" lines ('#' starts a
/// comment). Unknown keys are an error; missing keys keep their defaults.
/// Power may be given as P_max (W) or P_max_dBm, noise as N0 (W/Hz) or N0_dBm_per_Hz.
SystemConfig parse_config(const std::string& text, SystemConfig base = {});
SystemConfig load_config(const std::string& path, SystemConfig base = {});

}  // namespace pdlearn
