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

// Generated by tests/oracles/qos_oracle.py (mpmath, 50 digits). Do not edit.
#pragma once

namespace pdlearn::oracle {

inline constexpr double kInvQ_0p05 = 1.6448536269514727;
inline constexpr double kInvQ_5em6 = 4.4171734134690221;
inline constexpr double kTheta_a02_d8_e1em5 = 2.1551049129027834;
inline constexpr double kEb_a02_d8_e1em5 = 0.70797438749103653;
inline constexpr double kTheta_a1_d10_e0p2 = 0.20722431746378916;
inline constexpr double kEb_a1_d10_e0p2 = 1.1111558340137395;
inline constexpr double kRate_tw50_snr_e2m1 = 0.62005109795945589;
inline constexpr double kEffCap_two_point = 0.78310958475848641;
inline constexpr double kLog10Alpha_10m = -7.29;
inline constexpr double kLog10Alpha_250m = -12.546254432606861;
inline constexpr double kWf2_level = 1.5263157894736842;
inline constexpr double kWf2_power_low = 0.52631578947368421;
inline constexpr double kWf2_power_high = 1.4736842105263158;
inline constexpr double kWf2_cap_bits = 2.7340172384057794;
inline constexpr double kPhi10 = 0.5;

}  // namespace pdlearn::oracle
