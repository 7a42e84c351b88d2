#include "rdcfold/filters.hpp"

#include "rdcfold/textio.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rdcfold {

std::string_view to_string(ResidueClass c) {
  switch (c) {
    case ResidueClass::General: return "general";
    case ResidueClass::Glycine: return "glycine";
    case ResidueClass::Proline: return "proline";
  }
  throw std::invalid_argument("bad residue class value");
}

ResidueClass residue_class_from_string(std::string_view token) {
  if (token == "general") return ResidueClass::General;
  if (token == "glycine") return ResidueClass::Glycine;
  if (token == "proline") return ResidueClass::Proline;
  throw std::invalid_argument("unknown residue class '" + std::string(token) + "'");
}

ResidueClass residue_class_from_char(char code) {
  if (code == 'G' || code == 'g') return ResidueClass::Glycine;
  if (code == 'P' || code == 'p') return ResidueClass::Proline;
  return ResidueClass::General;
}

RamachandranTable RamachandranTable::default_table() {
  RamachandranTable t;
  // Helix, sheet and extended bands, as coarse rectangles.
  const RamaRect helix{-180.0, -30.0, -90.0, -10.0};
  const RamaRect sheet{-180.0, -30.0, 90.0, 180.0};
  const RamaRect extended{-180.0, -30.0, -180.0, -120.0};
  for (const RamaRect& r : {helix, sheet, extended}) {
    t.add_region(ResidueClass::General, r);
    t.add_region(ResidueClass::Glycine, r);
    // Proline's ring restricts phi.
    t.add_region(ResidueClass::Proline,
                 RamaRect{-100.0, -30.0, r.psi_min, r.psi_max});
  }
  // Left-handed region reachable by glycine.
  t.add_region(ResidueClass::Glycine, RamaRect{30.0, 100.0, -10.0, 90.0});
  return t;
}

void RamachandranTable::add_region(ResidueClass c, const RamaRect& r) {
  regions_[c].push_back(r);
}

const std::vector<RamaRect>& RamachandranTable::regions(ResidueClass c) const {
  auto it = regions_.find(c);
  if (it == regions_.end() || it->second.empty())
    throw std::invalid_argument("no allowed regions for class '" +
                                std::string(to_string(c)) + "'");
  return it->second;
}

void RamachandranTable::validate() const {
  for (ResidueClass c : {ResidueClass::General, ResidueClass::Glycine, ResidueClass::Proline}) {
    for (const RamaRect& r : regions(c)) {  // throws when a class is empty
      bool in_domain = r.phi_min >= -180.0 && r.phi_max <= 180.0 && r.psi_min >= -180.0 &&
                       r.psi_max <= 180.0;
      if (!in_domain || r.phi_min >= r.phi_max || r.psi_min >= r.psi_max)
        throw std::invalid_argument("bad allowed region for class '" +
                                    std::string(to_string(c)) + "'");
    }
  }
}

bool ramachandran_pass(const DihedralPair& d, ResidueClass c, const RamachandranTable& table) {
  for (const RamaRect& r : table.regions(c))
    if (r.contains(d)) return true;
  return false;
}

void KarplusCoefficients::validate() const {
  if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(phase_offset)))
    throw std::invalid_argument("Karplus coefficients must be finite");
}

double karplus_coupling(double phi_deg, const KarplusCoefficients& coeffs) {
  double theta = (phi_deg + coeffs.phase_offset) * std::numbers::pi / 180.0;
  double ct = std::cos(theta);
  return coeffs.a * ct * ct + coeffs.b * ct + coeffs.c;
}

std::vector<DihedralPair> filter_grid(std::span<const DihedralPair> grid, ResidueClass c,
                                      const RamachandranTable& table,
                                      const std::optional<ScalarCouplingRecord>& coupling,
                                      const KarplusCoefficients& coeffs) {
  std::vector<DihedralPair> out;
  out.reserve(grid.size());
  for (const DihedralPair& d : grid) {
    if (!ramachandran_pass(d, c, table)) continue;
    if (coupling &&
        std::abs(karplus_coupling(d.phi, coeffs) - coupling->j_value) > coupling->tolerance)
      continue;
    out.push_back(d);
  }
  return out;
}

RamachandranTable parse_rama_table(std::istream& in, const std::string& name) {
  RamachandranTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string cls, a, b, c, d;
    if (!(fields >> cls >> a >> b >> c >> d))
      throw std::invalid_argument(name + ":" + std::to_string(line_no) +
                                  ": expected 'class phi_min phi_max psi_min psi_max'");
    std::string context = name + ":" + std::to_string(line_no);
    t.add_region(residue_class_from_string(cls),
                 RamaRect{parse_double(a, context), parse_double(b, context),
                          parse_double(c, context), parse_double(d, context)});
  }
  t.validate();
  return t;
}

RamachandranTable parse_rama_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_rama_table(in, path);
}

void write_rama_table(std::ostream& out, const RamachandranTable& table) {
  for (ResidueClass c : {ResidueClass::General, ResidueClass::Glycine, ResidueClass::Proline}) {
    for (const RamaRect& r : table.regions(c)) {
      out << to_string(c) << ' ' << format_g9(r.phi_min) << ' ' << format_g9(r.phi_max) << ' '
          << format_g9(r.psi_min) << ' ' << format_g9(r.psi_max) << '\n';
    }
  }
  if (!out) throw std::runtime_error("Ramachandran table write failed");
}

std::vector<ScalarCouplingRecord> parse_coupling_table(std::istream& in,
                                                       const std::string& name) {
  std::vector<ScalarCouplingRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string res, j, tol;
    if (!(fields >> res >> j >> tol))
      throw std::invalid_argument(name + ":" + std::to_string(line_no) +
                                  ": expected 'res_index J tolerance'");
    std::string context = name + ":" + std::to_string(line_no);
    ScalarCouplingRecord rec{static_cast<int>(parse_long(res, context)),
                             parse_double(j, context), parse_double(tol, context)};
    if (!(rec.tolerance > 0.0))
      throw std::invalid_argument(context + ": tolerance must be positive");
    out.push_back(rec);
  }
  return out;
}

std::vector<ScalarCouplingRecord> parse_coupling_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_coupling_table(in, path);
}

}  // namespace rdcfold
