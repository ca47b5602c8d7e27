#include "iscsc/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iscsc {

using json = nlohmann::ordered_json;

// --------------------------- RngStream -------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view stream_id) {
  std::uint64_t x = seed ^ rotl(fnv1a(stream_id), 17);
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  cached_ = v * m;
  has_cached_ = true;
  return u * m;
}

cd RngStream::cnormal() {
  return cd(normal() * 0.7071067811865476, normal() * 0.7071067811865476);
}

int RngStream::uniform_int(int n) {
  return static_cast<int>(uniform() * n) % n;
}

// --------------------------- validation ------------------------------------

std::vector<std::string> validate_scene(const SceneConfig& sc) {
  std::vector<std::string> bad;
  auto err = [&](const std::string& m) { bad.push_back(m); };
  if (sc.n_antennas < 1) err("n_antennas must be >= 1");
  if (!(sc.wavelength > 0)) err("wavelength must be positive");
  if (!(sc.power_budget > 0)) err("power budget must be positive");
  if (!(sc.sigma2_c > 0)) err("noise.comm power must be positive");
  if (!(sc.sigma2_r > 0)) err("noise.radar power must be positive");
  if (!(sc.sigma2_e >= 0)) err("noise.echo_var must be nonnegative");
  if (!(sc.slot_duration > 0)) err("slot_duration_s must be positive");
  if (sc.snapshots_per_slot < 1) err("snapshots_per_slot must be >= 1");
  if (!(sc.reference_gain > 0)) err("pathloss.reference_gain must be positive");
  const std::size_t nrx = sc.devices.size() + sc.patients.size();
  if (!sc.epsilon.empty() && sc.epsilon.size() != nrx)
    err("uncertainty_radius must be a scalar or have one entry per device+patient");
  for (double e : sc.epsilon)
    if (!(e >= 0)) err("uncertainty_radius entries must be nonnegative");
  auto check_angle = [&](double a, const std::string& who) {
    if (!(a > -kPi / 2 && a < kPi / 2))
      err(who + ": angle must lie in (-90, 90) degrees");
  };
  for (std::size_t k = 0; k < sc.devices.size(); ++k) {
    check_angle(sc.devices[k].angle, "devices[" + std::to_string(k) + "]");
    if (!(sc.devices[k].distance > 0))
      err("devices[" + std::to_string(k) + "]: distance must be positive");
  }
  for (std::size_t l = 0; l < sc.patients.size(); ++l) {
    const auto& p = sc.patients[l];
    const std::string who = "patients[" + std::to_string(l) + "]";
    check_angle(p.angle, who);
    if (!(p.distance > 0)) err(who + ": distance must be positive");
    if (!(p.speed >= 0)) err(who + ": speed must be nonnegative");
    if (!(p.resp_hz > 0 && p.heart_hz > 0)) err(who + ": vital frequencies must be positive");
    if (p.resp_hz >= p.heart_hz) err(who + ": respiration frequency must be below heart frequency");
    if (!(p.resp_amp >= 0 && p.heart_amp >= 0)) err(who + ": vital amplitudes must be nonnegative");
  }
  if (!(sc.semantic.iota > 0)) err("semantic.iota must be positive");
  if (!(sc.semantic.extraction_coeff >= 0)) err("semantic.extraction_power_coeff must be nonnegative");
  if (!sc.semantic.rho_lb.empty() &&
      sc.semantic.rho_lb.size() != sc.devices.size())
    err("semantic.rho_lb must have one entry per device");
  for (double r : sc.semantic.rho_lb)
    if (!(r > 0 && r <= 1)) err("semantic.rho_lb entries must lie in (0, 1]");
  return bad;
}

void ensure_valid(const SceneConfig& sc) {
  auto bad = validate_scene(sc);
  if (!bad.empty()) throw std::invalid_argument("invalid scene: " + bad.front());
}

// --------------------------- JSON I/O --------------------------------------

namespace {

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) { ok = true; break; }
    if (!ok)
      throw std::invalid_argument("unknown key '" + where + it.key() + "' in scene config");
  }
}

}  // namespace

SceneConfig scene_from_json_text(const std::string& text) {
  json j = json::parse(text);
  SceneConfig sc;
  reject_unknown(j, "", {"n_antennas", "carrier_frequency_hz", "wavelength_m",
                         "power_budget_dbm", "noise", "slot_duration_s",
                         "snapshots_per_slot", "pathloss", "rician_k_db",
                         "uncertainty_radius", "semantic", "devices",
                         "patients", "seed"});
  if (j.contains("n_antennas")) sc.n_antennas = j["n_antennas"].get<int>();
  if (j.contains("carrier_frequency_hz") && j.contains("wavelength_m"))
    throw std::invalid_argument("give either carrier_frequency_hz or wavelength_m, not both");
  if (j.contains("carrier_frequency_hz"))
    sc.wavelength = kSpeedOfLight / j["carrier_frequency_hz"].get<double>();
  if (j.contains("wavelength_m")) sc.wavelength = j["wavelength_m"].get<double>();
  if (j.contains("power_budget_dbm"))
    sc.power_budget = dbm2watt(j["power_budget_dbm"].get<double>());
  if (j.contains("noise")) {
    const json& n = j["noise"];
    reject_unknown(n, "noise.", {"comm_dbm", "radar_dbm", "echo_var"});
    if (n.contains("comm_dbm")) sc.sigma2_c = dbm2watt(n["comm_dbm"].get<double>());
    if (n.contains("radar_dbm")) sc.sigma2_r = dbm2watt(n["radar_dbm"].get<double>());
    if (n.contains("echo_var")) sc.sigma2_e = n["echo_var"].get<double>();
  }
  if (j.contains("slot_duration_s")) sc.slot_duration = j["slot_duration_s"].get<double>();
  if (j.contains("snapshots_per_slot")) sc.snapshots_per_slot = j["snapshots_per_slot"].get<int>();
  if (j.contains("pathloss")) {
    const json& p = j["pathloss"];
    reject_unknown(p, "pathloss.", {"reference_gain", "exponent"});
    if (p.contains("reference_gain")) sc.reference_gain = p["reference_gain"].get<double>();
    if (p.contains("exponent")) sc.pathloss_exponent = p["exponent"].get<double>();
  }
  if (j.contains("rician_k_db")) {
    const json& r = j["rician_k_db"];
    reject_unknown(r, "rician_k_db.", {"devices", "patients"});
    if (r.contains("devices")) sc.rician_k_device_db = r["devices"].get<double>();
    if (r.contains("patients")) sc.rician_k_patient_db = r["patients"].get<double>();
  }
  if (j.contains("semantic")) {
    const json& s = j["semantic"];
    reject_unknown(s, "semantic.",
                   {"iota", "extraction_power_coeff", "log2_precisions", "rho_lb"});
    if (s.contains("iota")) sc.semantic.iota = s["iota"].get<double>();
    if (s.contains("extraction_power_coeff"))
      sc.semantic.extraction_coeff = s["extraction_power_coeff"].get<double>();
    if (s.contains("log2_precisions"))
      sc.semantic.log2_precisions = s["log2_precisions"].get<bool>();
    if (s.contains("rho_lb") && !s["rho_lb"].is_null())
      sc.semantic.rho_lb = s["rho_lb"].get<std::vector<double>>();
  }
  if (j.contains("devices")) {
    for (const json& d : j["devices"]) {
      reject_unknown(d, "devices[].", {"angle_deg", "distance_m"});
      DeviceSpec ds;
      ds.angle = deg2rad(d.at("angle_deg").get<double>());
      ds.distance = d.at("distance_m").get<double>();
      sc.devices.push_back(ds);
    }
  }
  if (j.contains("patients")) {
    for (const json& p : j["patients"]) {
      reject_unknown(p, "patients[].",
                     {"angle_deg", "distance_m", "speed_mps", "resp_hz",
                      "heart_hz", "resp_amp_m", "heart_amp_m"});
      PatientSpec ps;
      ps.angle = deg2rad(p.at("angle_deg").get<double>());
      ps.distance = p.at("distance_m").get<double>();
      if (p.contains("speed_mps")) ps.speed = p["speed_mps"].get<double>();
      if (p.contains("resp_hz")) ps.resp_hz = p["resp_hz"].get<double>();
      if (p.contains("heart_hz")) ps.heart_hz = p["heart_hz"].get<double>();
      if (p.contains("resp_amp_m")) ps.resp_amp = p["resp_amp_m"].get<double>();
      if (p.contains("heart_amp_m")) ps.heart_amp = p["heart_amp_m"].get<double>();
      sc.patients.push_back(ps);
    }
  }
  if (j.contains("uncertainty_radius")) {
    const json& u = j["uncertainty_radius"];
    if (u.is_number()) {
      sc.epsilon.assign(sc.devices.size() + sc.patients.size(), u.get<double>());
    } else {
      sc.epsilon = u.get<std::vector<double>>();
    }
  } else {
    sc.epsilon.assign(sc.devices.size() + sc.patients.size(), 0.01);
  }
  if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
  return sc;
}

SceneConfig load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json_text(ss.str());
}

std::string scene_to_json_text(const SceneConfig& sc) {
  json j;
  j["n_antennas"] = sc.n_antennas;
  j["wavelength_m"] = sc.wavelength;
  j["power_budget_dbm"] = watt2dbm(sc.power_budget);
  j["noise"] = {{"comm_dbm", watt2dbm(sc.sigma2_c)},
                {"radar_dbm", watt2dbm(sc.sigma2_r)},
                {"echo_var", sc.sigma2_e}};
  j["slot_duration_s"] = sc.slot_duration;
  j["snapshots_per_slot"] = sc.snapshots_per_slot;
  j["pathloss"] = {{"reference_gain", sc.reference_gain},
                   {"exponent", sc.pathloss_exponent}};
  j["rician_k_db"] = {{"devices", sc.rician_k_device_db},
                      {"patients", sc.rician_k_patient_db}};
  j["uncertainty_radius"] = sc.epsilon;
  json sem;
  sem["iota"] = sc.semantic.iota;
  sem["extraction_power_coeff"] = sc.semantic.extraction_coeff;
  sem["log2_precisions"] = sc.semantic.log2_precisions;
  if (!sc.semantic.rho_lb.empty()) sem["rho_lb"] = sc.semantic.rho_lb;
  j["semantic"] = sem;
  j["devices"] = json::array();
  for (const auto& d : sc.devices)
    j["devices"].push_back({{"angle_deg", rad2deg(d.angle)},
                            {"distance_m", d.distance}});
  j["patients"] = json::array();
  for (const auto& p : sc.patients)
    j["patients"].push_back({{"angle_deg", rad2deg(p.angle)},
                             {"distance_m", p.distance},
                             {"speed_mps", p.speed},
                             {"resp_hz", p.resp_hz},
                             {"heart_hz", p.heart_hz},
                             {"resp_amp_m", p.resp_amp},
                             {"heart_amp_m", p.heart_amp}});
  j["seed"] = sc.seed;
  return j.dump(2) + "\n";
}

void save_scene(const SceneConfig& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene config: " + path);
  out << scene_to_json_text(sc);
}

// --------------------------- array manifold --------------------------------

VecC steering(double theta, int n) {
  VecC a(n);
  const double ps = kPi * std::sin(theta);
  for (int m = 0; m < n; ++m) a[m] = std::polar(1.0, ps * m);
  return a;
}

VecC steering_derivative(double theta, int n) {
  VecC da(n);
  const double ps = kPi * std::sin(theta);
  const double pc = kPi * std::cos(theta);
  for (int m = 0; m < n; ++m) da[m] = cd(0.0, pc * m) * std::polar(1.0, ps * m);
  return da;
}

double pathloss_alpha(const SceneConfig& sc, double d) {
  return sc.reference_gain / std::pow(d, sc.pathloss_exponent);
}

double pathloss_beta(const SceneConfig& sc, double d) {
  return sc.reference_gain * sc.reference_gain / std::pow(d, sc.pathloss_exponent);
}

// --------------------------- channels --------------------------------------

SceneChannels make_channels(const SceneConfig& sc, RngStream& rng) {
  SceneChannels out;
  const int n = sc.n_antennas;
  const double kap_d = db2lin(sc.rician_k_device_db);
  const double kap_p = db2lin(sc.rician_k_patient_db);
  for (const auto& d : sc.devices) {
    Channel ch;
    ch.alpha = pathloss_alpha(sc, d.distance);
    const VecC a = steering(d.angle, n);
    VecC g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.cnormal();
    const VecC los = std::sqrt(kap_d / (1.0 + kap_d)) * a;
    const VecC nlos = std::sqrt(1.0 / (1.0 + kap_d)) * g;
    ch.h = ch.alpha * (los + nlos);
    ch.nlos_norm = (ch.alpha * nlos).norm();
    out.devices.push_back(std::move(ch));
  }
  for (const auto& p : sc.patients) {
    Channel ch;
    ch.alpha = pathloss_alpha(sc, p.distance);
    const VecC a = steering(p.angle, n);
    VecC g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.cnormal();
    const VecC nlos = (ch.alpha / std::sqrt(kap_p)) * g;
    ch.h = ch.alpha * a + nlos;
    ch.nlos_norm = nlos.norm();
    out.patients.push_back(std::move(ch));
  }
  return out;
}

VecC nominal_channel(const SceneConfig& sc, double theta, double distance) {
  return pathloss_alpha(sc, distance) * steering(theta, sc.n_antennas);
}

VecC sample_uncertainty(double eps, int n, RngStream& rng) {
  VecC g(n);
  for (int i = 0; i < n; ++i) g[i] = rng.cnormal();
  const double nrm = g.norm();
  if (nrm == 0.0) return VecC::Zero(n);
  // Radius correction for a uniform draw from a 2n-dimensional real ball.
  const double r = eps * std::pow(rng.uniform(), 1.0 / (2.0 * n));
  return (r / nrm) * g;
}

SceneConfig example_scene() {
  SceneConfig sc;
  sc.devices = {{deg2rad(-30.0), 8.0}, {deg2rad(20.0), 4.0}};
  PatientSpec p1{deg2rad(-35.0), 2.0, 0.1, 0.25, 1.2, 5e-3, 1e-3};
  PatientSpec p2{deg2rad(5.0), 5.0, 0.1, 0.3145, 1.345, 5e-3, 1e-3};
  PatientSpec p3{deg2rad(25.0), 1.0, 0.1, 0.18, 1.0578, 5e-3, 1e-3};
  sc.patients = {p1, p2, p3};
  sc.epsilon.assign(sc.devices.size() + sc.patients.size(), 0.01);
  return sc;
}

}  // namespace iscsc
