#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "specctrl/plant_builders.hpp"
#include "specctrl/simulation.hpp"
#include "specctrl/spectral_model.hpp"
#include "specctrl/synthesis.hpp"

namespace specctrl::io {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Scalars and matrices

inline json to_json(cd z) { return json::array({z.real(), z.imag()}); }

inline cd complex_from_json(const json& j) {
  if (j.is_number()) return cd(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return cd(j[0].get<double>(), j[1].get<double>());
  }
  throw ModelError("json: expected a complex number [re, im], got " + j.dump());
}

/// Complex matrix as an array of rows of [re, im] pairs.
inline json to_json(const CMat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(to_json(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Reads a complex matrix. `rows` and `cols` disambiguate empty arrays.
inline CMat cmat_from_json(const json& j, Eigen::Index rows_if_empty = 0,
                           Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw ModelError("json: expected a matrix (array of rows), got " + j.dump());
  if (j.empty()) return CMat::Zero(rows_if_empty, cols_if_empty);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  CMat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ModelError("json: ragged matrix row " + std::to_string(i));
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = complex_from_json(row[static_cast<std::size_t>(k)]);
  }
  return m;
}

/// Real matrix from a number (1 x 1), a flat array (column vector) or an
/// array of rows.
inline RMat rmat_from_json(const json& j) {
  if (j.is_number()) return RMat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ModelError("json: expected a real matrix, got " + j.dump());
  if (j[0].is_number()) {
    RMat m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    return m;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  RMat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ModelError("json: ragged matrix row " + std::to_string(i));
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

inline json to_json(const RMat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<cd> poles_from_json(const json& j) {
  std::vector<cd> out;
  if (!j.is_array()) throw ModelError("json: expected an array of poles");
  for (const auto& p : j) out.push_back(complex_from_json(p));
  return out;
}

inline json to_json(const std::vector<cd>& v) {
  json a = json::array();
  for (const cd& z : v) a.push_back(to_json(z));
  return a;
}

// ---------------------------------------------------------------------------
// Files

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ModelError("invalid JSON in " + path + ": " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write " + path);
  out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
inline std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Spectral model

inline json to_json(const SpectralModel& m) {
  json j;
  j["delta"] = m.delta;
  j["n_u"] = m.n_u();
  j["n_y"] = m.n_y();
  j["A0"] = to_json(m.A0);
  j["A1"] = to_json(m.A1);
  j["B0"] = to_json(m.B0);
  j["B1"] = to_json(m.B1);
  j["C0"] = to_json(m.C0);
  j["C1"] = to_json(m.C1);
  json tail = json::array();
  for (const auto& t : m.tail) {
    json e;
    e["a"] = to_json(t.a);
    json b = json::array();
    for (Eigen::Index k = 0; k < t.b.size(); ++k) b.push_back(to_json(t.b(k)));
    json c = json::array();
    for (Eigen::Index k = 0; k < t.c.size(); ++k) c.push_back(to_json(t.c(k)));
    e["b"] = std::move(b);
    e["c"] = std::move(c);
    tail.push_back(std::move(e));
  }
  j["tail"] = std::move(tail);
  j["tail_b_sum_bound"] = m.tail_b_sum_bound ? json(*m.tail_b_sum_bound) : json(nullptr);
  j["tail_c_sum_bound"] = m.tail_c_sum_bound ? json(*m.tail_c_sum_bound) : json(nullptr);
  return j;
}

inline SpectralModel model_from_json(const json& j) {
  for (const char* key : {"delta", "A0", "A1", "B0", "B1", "C0", "C1", "tail"}) {
    if (!j.contains(key)) throw ModelError(std::string("model json: missing key ") + key);
  }
  SpectralModel m;
  m.delta = j.at("delta").get<double>();
  const json& tail = j.at("tail");
  const Eigen::Index n0 = static_cast<Eigen::Index>(j.at("A0").size());
  const Eigen::Index n1 = static_cast<Eigen::Index>(j.at("A1").size());
  Eigen::Index nu = j.value("n_u", 0);
  Eigen::Index ny = j.value("n_y", 0);
  if (nu == 0) {
    if (n0 > 0) nu = static_cast<Eigen::Index>(j.at("B0")[0].size());
    else if (n1 > 0) nu = static_cast<Eigen::Index>(j.at("B1")[0].size());
    else if (!tail.empty()) nu = static_cast<Eigen::Index>(tail[0].at("b").size());
  }
  if (ny == 0) {
    if (!j.at("C0").empty()) ny = static_cast<Eigen::Index>(j.at("C0").size());
    else if (!j.at("C1").empty()) ny = static_cast<Eigen::Index>(j.at("C1").size());
    else if (!tail.empty()) ny = static_cast<Eigen::Index>(tail[0].at("c").size());
  }
  m.A0 = cmat_from_json(j.at("A0"), 0, 0);
  m.A1 = cmat_from_json(j.at("A1"), 0, 0);
  m.B0 = cmat_from_json(j.at("B0"), n0, nu);
  m.B1 = cmat_from_json(j.at("B1"), n1, nu);
  m.C0 = cmat_from_json(j.at("C0"), ny, n0);
  m.C1 = cmat_from_json(j.at("C1"), ny, n1);
  // An empty block with a known partner dimension is stored as rows x 0.
  if (m.C0.size() == 0) m.C0 = CMat::Zero(ny, n0);
  if (m.C1.size() == 0) m.C1 = CMat::Zero(ny, n1);
  for (const auto& e : tail) {
    ModalTriple t;
    t.a = complex_from_json(e.at("a"));
    const json& b = e.at("b");
    const json& c = e.at("c");
    t.b.resize(static_cast<Eigen::Index>(b.size()));
    for (std::size_t k = 0; k < b.size(); ++k) t.b(static_cast<Eigen::Index>(k)) = complex_from_json(b[k]);
    t.c.resize(static_cast<Eigen::Index>(c.size()));
    for (std::size_t k = 0; k < c.size(); ++k) t.c(static_cast<Eigen::Index>(k)) = complex_from_json(c[k]);
    m.tail.push_back(std::move(t));
  }
  if (j.contains("tail_b_sum_bound") && !j.at("tail_b_sum_bound").is_null()) {
    m.tail_b_sum_bound = j.at("tail_b_sum_bound").get<double>();
  }
  if (j.contains("tail_c_sum_bound") && !j.at("tail_c_sum_bound").is_null()) {
    m.tail_c_sum_bound = j.at("tail_c_sum_bound").get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Plants

struct ToySpec {
  Eigen::Index n1_dim = 2;
  Eigen::Index n_tail = 200;
};

struct PlantSpec {
  std::variant<ToySpec, OdePdePlant> plant;
  int order = 10;  // rational approximation order for PDE plants
};

inline PlantSpec plant_from_json(const json& j) {
  const std::string kind = j.value("kind", "");
  PlantSpec spec;
  spec.order = j.value("order", 10);
  if (kind == "toy") {
    ToySpec t;
    t.n1_dim = j.value("n1_dim", 2);
    t.n_tail = j.value("n_tail", 200);
    spec.plant = t;
    return spec;
  }
  if (kind != "transport" && kind != "reaction_diffusion") {
    throw ModelError("plant json: kind must be toy, transport or reaction_diffusion");
  }
  OdePdePlant p;
  p.A = rmat_from_json(j.at("A"));
  p.B = rmat_from_json(j.at("B"));
  p.Bu = rmat_from_json(j.at("Bu"));
  p.C = rmat_from_json(j.at("C"));
  p.Cy = rmat_from_json(j.at("Cy"));
  // Row vectors given flat arrive as columns.
  if (p.C.cols() == 1 && p.C.rows() == p.A.rows() && p.A.rows() > 1) p.C.transposeInPlace();
  if (p.Cy.cols() == 1 && p.Cy.rows() == p.A.rows() && p.A.rows() > 1) p.Cy.transposeInPlace();
  if (kind == "transport") {
    p.kind = Transport{j.at("h").get<double>()};
  } else {
    p.kind = ReactionDiffusion{j.at("nu").get<double>(), j.at("lambda").get<double>()};
  }
  check_plant(p);
  spec.plant = p;
  return spec;
}

// ---------------------------------------------------------------------------
// Synthesis artifacts

struct PoleConfig {
  std::vector<cd> controller_poles;
  std::vector<cd> observer_poles;
};

inline PoleConfig poles_config_from_json(const json& j) {
  if (!j.contains("controller_poles") || !j.contains("observer_poles")) {
    throw ModelError("gains json: expected controller_poles and observer_poles");
  }
  return PoleConfig{poles_from_json(j.at("controller_poles")), poles_from_json(j.at("observer_poles"))};
}

inline json to_json(const Gains& g) {
  json j;
  j["K0"] = to_json(g.K0);
  j["G0"] = to_json(g.G0);
  j["controller_poles"] = to_json(g.controller_poles);
  j["observer_poles"] = to_json(g.observer_poles);
  return j;
}

inline Gains gains_from_json(const json& j, const SpectralModel& m) {
  Gains g;
  g.K0 = cmat_from_json(j.at("K0"), m.n_u(), m.n0());
  g.G0 = cmat_from_json(j.at("G0"), m.n0(), m.n_y());
  if (g.K0.size() == 0) g.K0 = CMat::Zero(m.n_u(), m.n0());
  if (g.G0.size() == 0) g.G0 = CMat::Zero(m.n0(), m.n_y());
  if (j.contains("controller_poles")) g.controller_poles = poles_from_json(j.at("controller_poles"));
  if (j.contains("observer_poles")) g.observer_poles = poles_from_json(j.at("observer_poles"));
  return g;
}

inline json to_json(const Certificate& c) {
  json j;
  j["delta"] = c.delta;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["rho"] = c.rho;
  j["eta"] = {{"e0", c.eta0}, {"e1", c.eta1}, {"e2", c.eta2}, {"max", c.eta}};
  j["satisfied"] = c.satisfied;
  j["certified_rate"] = c.certified_rate;
  j["tail"] = {{"S_b", c.S_b}, {"S_c", c.S_c}, {"inconclusive", c.tail_inconclusive}};
  return j;
}

inline Certificate certificate_from_json(const json& j) {
  Certificate c;
  c.delta = j.at("delta").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.rho = j.at("rho").get<double>();
  c.eta0 = j.at("eta").at("e0").get<double>();
  c.eta1 = j.at("eta").at("e1").get<double>();
  c.eta2 = j.at("eta").at("e2").get<double>();
  c.eta = j.at("eta").at("max").get<double>();
  c.satisfied = j.at("satisfied").get<bool>();
  c.certified_rate = j.at("certified_rate").get<double>();
  c.S_b = j.at("tail").at("S_b").get<double>();
  c.S_c = j.at("tail").at("S_c").get<double>();
  c.tail_inconclusive = j.at("tail").at("inconclusive").get<bool>();
  return c;
}

/// Controller file: realization plus the gains it was assembled from.
inline json to_json(const ControllerRealization& c, const Gains& g) {
  json j;
  j["representation"] =
      c.representation == Representation::Complex ? "complex" : "realified_block_diagonal";
  j["L"] = to_json(c.L);
  j["M"] = to_json(c.M);
  j["N"] = to_json(c.Nmat);
  j["K"] = to_json(c.K);
  j["gains"] = to_json(g);
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string trajectory_csv(const Trajectory& t) {
  std::string out = "t,norm_xhat0,norm_e0,norm_xhat1,norm_e1,norm_z,V,total_norm\n";
  for (const auto& s : t.samples) {
    for (double v : {s.t, s.norm_xhat0, s.norm_e0, s.norm_xhat1, s.norm_e1, s.norm_z, s.V}) {
      out += format_double(v);
      out += ',';
    }
    out += format_double(s.total_norm);
    out += '\n';
  }
  return out;
}

inline std::string sweep_csv(const std::vector<SweepTrial>& trials) {
  std::string out = "trial,eta,rho,fitted_rate,stable\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& t : trials) {
    out += std::to_string(t.index) + ',';
    out += format_double(t.certificate ? t.certificate->eta : nan) + ',';
    out += format_double(t.certificate ? t.certificate->rho : nan) + ',';
    out += format_double(t.fit ? t.fit->rate : nan) + ',';
    out += (t.stable() ? "1" : "0");
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

/// Run record written next to the outputs: config echo, input hashes and
/// output hashes.
inline json manifest(const std::string& subcommand, const json& config,
                     const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  json j;
  j["tool"] = "specctrl";
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  j["config"] = config;
  json in = json::array();
  for (const auto& p : inputs) in.push_back({{"path", p}, {"fnv1a64", fnv1a(read_text(p))}});
  j["inputs"] = std::move(in);
  json out = json::array();
  for (const auto& p : outputs) out.push_back({{"path", p}, {"fnv1a64", fnv1a(read_text(p))}});
  j["outputs"] = std::move(out);
  j["timestamp"] = static_cast<long long>(std::time(nullptr));
  return j;
}

}  // namespace specctrl::io
