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

#include "pdlearn/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "pdlearn/errors.hpp"

namespace pdlearn {

std::string to_string(FadingKind k) {
  return k == FadingKind::GammaNt ? "gamma_nt" : "exponential";
}

double SystemConfig::fading_mean() const {
  return fading_kind == FadingKind::GammaNt ? static_cast<double>(num_antennas_Nt) : 1.0;
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be positive and finite");
  };
  positive(slot_duration_Ts, "slot_duration_Ts");
  positive(tx_duration_tau, "tx_duration_tau");
  if (!(tx_duration_tau < slot_duration_Ts)) fail("tx_duration_tau must be shorter than slot_duration_Ts");
  if (tx_delay_Dt < 0 || dec_delay_Dc < 0) fail("Dt and Dc must be nonnegative");
  if (queue_delay_bound() <= 0) fail("Dt + Dc must be smaller than Dmax");
  if (!(eps_max > 0.0 && eps_max < 1.0)) fail("eps_max must lie in (0, 1)");
  positive(packet_bits_u, "packet_bits_u");
  positive(arrival_rate_a, "arrival_rate_a");
  positive(P_max, "P_max");
  positive(W_max, "W_max");
  positive(N0, "N0");
  if (num_antennas_Nt < 1) fail("num_antennas_Nt must be at least 1");
  positive(cell_min_dist, "cell_min_dist");
  if (!(cell_max_dist >= cell_min_dist)) fail("cell_max_dist must be >= cell_min_dist");
  if (!std::isfinite(pathloss_offset_dB) || !std::isfinite(pathloss_slope_dB)) fail("pathloss must be finite");
}

std::string SystemConfig::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "slot_duration_Ts = " << slot_duration_Ts << "\n"
     << "tx_duration_tau = " << tx_duration_tau << "\n"
     << "dl_delay_bound_Dmax = " << dl_delay_bound_Dmax << "\n"
     << "tx_delay_Dt = " << tx_delay_Dt << "\n"
     << "dec_delay_Dc = " << dec_delay_Dc << "\n"
     << "eps_max = " << eps_max << "\n"
     << "packet_bits_u = " << packet_bits_u << "\n"
     << "arrival_rate_a = " << arrival_rate_a << "\n"
     << "P_max = " << P_max << "\n"
     << "W_max = " << W_max << "\n"
     << "N0 = " << N0 << "\n"
     << "num_antennas_Nt = " << num_antennas_Nt << "\n"
     << "pathloss_offset_dB = " << pathloss_offset_dB << "\n"
     << "pathloss_slope_dB = " << pathloss_slope_dB << "\n"
     << "cell_min_dist = " << cell_min_dist << "\n"
     << "cell_max_dist = " << cell_max_dist << "\n"
     << "fading_kind = \"" << to_string(fading_kind) << "\"\n";
  return os.str();
}

std::uint64_t SystemConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

}  // namespace

SystemConfig parse_config(const std::string& text, SystemConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);

    if (key == "slot_duration_Ts") cfg.slot_duration_Ts = to_double(key, value);
    else if (key == "tx_duration_tau") cfg.tx_duration_tau = to_double(key, value);
    else if (key == "dl_delay_bound_Dmax") cfg.dl_delay_bound_Dmax = to_int(key, value);
    else if (key == "tx_delay_Dt") cfg.tx_delay_Dt = to_int(key, value);
    else if (key == "dec_delay_Dc") cfg.dec_delay_Dc = to_int(key, value);
    else if (key == "eps_max") cfg.eps_max = to_double(key, value);
    else if (key == "packet_bits_u") cfg.packet_bits_u = to_double(key, value);
    else if (key == "arrival_rate_a") cfg.arrival_rate_a = to_double(key, value);
    else if (key == "P_max") cfg.P_max = to_double(key, value);
    else if (key == "P_max_dBm") cfg.P_max = std::pow(10.0, to_double(key, value) / 10.0) / 1000.0;
    else if (key == "W_max") cfg.W_max = to_double(key, value);
    else if (key == "N0") cfg.N0 = to_double(key, value);
    else if (key == "N0_dBm_per_Hz") cfg.N0 = std::pow(10.0, to_double(key, value) / 10.0) / 1000.0;
    else if (key == "num_antennas_Nt") cfg.num_antennas_Nt = to_int(key, value);
    else if (key == "pathloss_offset_dB") cfg.pathloss_offset_dB = to_double(key, value);
    else if (key == "pathloss_slope_dB") cfg.pathloss_slope_dB = to_double(key, value);
    else if (key == "cell_min_dist") cfg.cell_min_dist = to_double(key, value);
    else if (key == "cell_max_dist") cfg.cell_max_dist = to_double(key, value);
    else if (key == "fading_kind") {
      if (value == "gamma_nt") cfg.fading_kind = FadingKind::GammaNt;
      else if (value == "exponential") cfg.fading_kind = FadingKind::Exponential;
      else throw ConfigError("fading_kind must be gamma_nt or exponential, got '" + value + "'");
    } else {
      throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(lineno));
    }
  }
  cfg.validate();
  return cfg;
}

SystemConfig load_config(const std::string& path, SystemConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), base);
}

}  // namespace pdlearn
