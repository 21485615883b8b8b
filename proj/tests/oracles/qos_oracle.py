#!/usr/bin/env python3
# Copyright 2026 The pdlearn Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent high-precision reference values for the C++ test suite.

Everything here is computed with mpmath at 50 significant digits and without
touching the C++ code path. The printed values are frozen into
tests/oracle_values.hpp; rerun this script to regenerate them.
"""

import mpmath as mp

mp.mp.dps = 50


def q_tail(x):
    return mp.erfc(x / mp.sqrt(2)) / 2


def inv_q_bisect(p):
    lo, hi = mp.mpf(-40), mp.mpf(40)
    for _ in range(400):
        mid = (lo + hi) / 2
        if q_tail(mid) > p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def theta(a, dq, eps):
    return mp.log(1 + abs(mp.log(eps / 2)) / (a * dq))


def eff_bw(a, dq, eps):
    return abs(mp.log(eps / 2)) / (dq * theta(a, dq, eps))


def rate(tau_w, snr, u, eps):
    q = inv_q_bisect(eps / 2)
    v = tau_w / (u * mp.log(2)) * (mp.log(1 + snr) - q / mp.sqrt(tau_w))
    return max(v, mp.mpf(0))


def eff_cap(samples, th):
    m = sum(mp.e ** (-th * s) for s in samples) / len(samples)
    return -mp.log(m) / th


def water_two_point(g_vals, probs, snr_unit, p_ave):
    # P(g) = (mu - 1/(snr_unit*g))^+, E{P} = p_ave; bisection on mu.
    def mean_p(mu):
        return sum(pr * max(mu - 1 / (snr_unit * g), 0) for g, pr in zip(g_vals, probs))

    lo, hi = mp.mpf(0), p_ave + max(1 / (snr_unit * g) for g in g_vals)
    for _ in range(400):
        mid = (lo + hi) / 2
        if mean_p(mid) < p_ave:
            lo = mid
        else:
            hi = mid
    mu = (lo + hi) / 2
    powers = [max(mu - 1 / (snr_unit * g), 0) for g in g_vals]
    cap = sum(pr * mp.log(1 + snr_unit * g * p, 2) for g, p, pr in zip(g_vals, powers, probs))
    return mu, powers, cap


def main():
    out = {}
    out["kInvQ_0p05"] = inv_q_bisect(mp.mpf("0.05"))
    out["kInvQ_5em6"] = inv_q_bisect(mp.mpf("5e-6"))
    out["kTheta_a02_d8_e1em5"] = theta(mp.mpf("0.2"), 8, mp.mpf("1e-5"))
    out["kEb_a02_d8_e1em5"] = eff_bw(mp.mpf("0.2"), 8, mp.mpf("1e-5"))
    out["kTheta_a1_d10_e0p2"] = theta(1, 10, mp.mpf("0.2"))
    out["kEb_a1_d10_e0p2"] = eff_bw(1, 10, mp.mpf("0.2"))
    out["kRate_tw50_snr_e2m1"] = rate(mp.mpf(50), mp.e ** 2 - 1, 160, mp.mpf("1e-5"))
    out["kEffCap_two_point"] = eff_cap([mp.mpf("0.5"), mp.mpf("1.5")], 2)
    out["kLog10Alpha_10m"] = -(mp.mpf("35.3") + mp.mpf("37.6")) / 10
    out["kLog10Alpha_250m"] = -(mp.mpf("35.3") + mp.mpf("37.6") * mp.log10(250)) / 10
    # Two-point water filling: g in {0.1, 1.9}, equiprobable, alpha*P/(N0*W) unit = 10, P_ave = 1.
    mu, powers, cap = water_two_point([mp.mpf("0.1"), mp.mpf("1.9")], [mp.mpf("0.5")] * 2,
                                      mp.mpf(10), mp.mpf(1))
    out["kWf2_level"] = mu
    out["kWf2_power_low"] = powers[0]
    out["kWf2_power_high"] = powers[1]
    out["kWf2_cap_bits"] = cap
    # phi(10) for 1/(1+0.1 t)
    out["kPhi10"] = mp.mpf(1) / (1 + mp.mpf("0.1") * 10)
    for k, v in out.items():
        print(f"inline constexpr double {k} = {mp.nstr(v, 17)};")


if __name__ == "__main__":
    main()
