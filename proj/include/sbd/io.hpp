// Field-specification JSON documents, experiment configs and CSV output.
//
// Field spec layout:
//   {
//     "domain": {"lo": [x, y], "hi": [x, y]},
//     "target": {"lo": [x, y], "hi": [x, y]},        // optional subdomain
//     "h": 0.0078125,
//     "components": ["expr u1", "expr u2"],          // smooth part below
//     "jump_segments": [
//       {"p0": [...], "p1": [...], "normal": [...],
//        "amplitude": ["expr", "expr"], "crack": 0}
//     ]
//   }
// Segments sharing a "crack" id form one chained polyline and must carry the
// same amplitude expressions (the ambient extension of [u]).
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbd/corpus.hpp"
#include "sbd/field.hpp"

namespace sbd {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json rect_to_json(const Rect& r) {
  return {{"lo", {r.center.x - r.half.x, r.center.y - r.half.y}},
          {"hi", {r.center.x + r.half.x, r.center.y + r.half.y}}};
}

inline Rect rect_from_json(const nlohmann::json& j) {
  return Rect::from_bounds(j.at("lo").at(0).get<double>(),
                           j.at("lo").at(1).get<double>(),
                           j.at("hi").at(0).get<double>(),
                           j.at("hi").at(1).get<double>());
}

inline nlohmann::json field_spec_to_json(const FieldSpec& spec,
                                         std::uint64_t seed = 0) {
  nlohmann::json j;
  j["domain"] = rect_to_json(spec.domain);
  if (spec.target) j["target"] = rect_to_json(*spec.target);
  j["h"] = spec.h;
  j["components"] = {spec.base1, spec.base2};
  j["seed"] = seed;
  nlohmann::json segs = nlohmann::json::array();
  for (size_t ci = 0; ci < spec.cracks.size(); ++ci) {
    const auto& c = spec.cracks[ci];
    for (size_t i = 0; i + 1 < c.vertices.size(); ++i) {
      const Vec2 a = c.vertices[i], b = c.vertices[i + 1];
      const Vec2 n = (b - a).perp().normalized();
      segs.push_back({{"p0", {a.x, a.y}},
                      {"p1", {b.x, b.y}},
                      {"normal", {n.x, n.y}},
                      {"amplitude", {c.amp1, c.amp2}},
                      {"crack", ci}});
    }
  }
  j["jump_segments"] = std::move(segs);
  return j;
}

inline FieldSpec field_spec_from_json(const nlohmann::json& j) {
  FieldSpec spec;
  spec.domain = rect_from_json(j.at("domain"));
  if (j.contains("target")) spec.target = rect_from_json(j.at("target"));
  spec.h = j.at("h").get<double>();
  spec.base1 = j.at("components").at(0).get<std::string>();
  spec.base2 = j.at("components").at(1).get<std::string>();
  std::map<int, FieldSpec::CrackSpec> cracks;
  std::map<int, Vec2> last_pt;
  for (const auto& js : j.value("jump_segments", nlohmann::json::array())) {
    const int id = js.value("crack", -1);
    const Vec2 p0{js.at("p0").at(0).get<double>(), js.at("p0").at(1).get<double>()};
    const Vec2 p1{js.at("p1").at(0).get<double>(), js.at("p1").at(1).get<double>()};
    const Vec2 n{js.at("normal").at(0).get<double>(),
                 js.at("normal").at(1).get<double>()};
    const Vec2 expect = (p1 - p0).perp().normalized();
    if ((n - expect).norm() > 1e-9)
      throw std::invalid_argument(
          "field spec: segment normal must equal the left normal of p1 - p0");
    const std::string a1 = js.at("amplitude").at(0).get<std::string>();
    const std::string a2 = js.at("amplitude").at(1).get<std::string>();
    auto it = cracks.find(id);
    if (it == cracks.end() || id < 0) {
      FieldSpec::CrackSpec c;
      c.vertices = {p0, p1};
      c.amp1 = a1;
      c.amp2 = a2;
      const int key = id < 0 ? -(static_cast<int>(cracks.size()) + 1000) : id;
      cracks[key] = std::move(c);
      last_pt[key] = p1;
    } else {
      if ((last_pt[id] - p0).norm() > 1e-12)
        throw std::invalid_argument("field spec: crack segments must chain p1 -> p0");
      if (it->second.amp1 != a1 || it->second.amp2 != a2)
        throw std::invalid_argument(
            "field spec: one crack must carry one amplitude expression");
      it->second.vertices.push_back(p1);
      last_pt[id] = p1;
    }
  }
  for (auto& [id, c] : cracks) spec.cracks.push_back(std::move(c));
  return spec;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SbdField load_field(const std::string& path) {
  return field_spec_from_json(nlohmann::json::parse(read_text_file(path))).build();
}

// ---------------------------------------------------------------------------
// gamma experiment config:
//   {"dimension": 1, "L": 0.125, "delta": 1.0, "x0": 0.0625,
//    "psi": {"name": "linear"}, "p": 2.0,
//    "eps_list": [...], "h_rule": "eps_over_8"}

struct GammaConfig {
  int dimension = 1;
  double L = 0.125;
  double delta = 1.0;
  double x0 = 0.0625;
  std::string psi_name = "linear";
  double psi_param = 1.0;
  double p = 2.0;
  std::vector<double> eps_list = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  std::string h_rule = "eps_over_8";

  PsiFn psi() const {
    if (psi_name == "linear") return [](double s) { return 1.0 - s; };
    if (psi_name == "power") {
      const double g = psi_param;
      return [g](double s) { return std::pow(1.0 - s, g); };
    }
    throw std::invalid_argument("unknown psi family: " + psi_name);
  }
};

inline GammaConfig gamma_config_from_json(const nlohmann::json& j) {
  GammaConfig c;
  c.dimension = j.value("dimension", 1);
  c.L = j.value("L", 0.125);
  c.delta = j.value("delta", 1.0);
  c.x0 = j.value("x0", c.L / 2.0);
  if (j.contains("psi")) {
    c.psi_name = j.at("psi").value("name", "linear");
    c.psi_param = j.at("psi").value("param", 1.0);
  }
  c.p = j.value("p", 2.0);
  if (j.contains("eps_list"))
    c.eps_list = j.at("eps_list").get<std::vector<double>>();
  c.h_rule = j.value("h_rule", "eps_over_8");
  return c;
}

}  // namespace sbd
