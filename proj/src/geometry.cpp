#include "rdcfold/geometry.hpp"

#include "rdcfold/textio.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rdcfold {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
// Carbonyl oxygen placement (not part of any scored vector type):
// CA-C'-O angle, with O anti to N across the CA-C' axis.
constexpr double kAngCaCO = 120.8;
constexpr double kTorsionNCaCO = 180.0;

Vec3 unit(const Vec3& v) { return v / v.norm(); }

Vec3 amide_h(const Vec3& prev_c, const Vec3& n, const Vec3& ca,
             const PeptideGeometryParams& p) {
  // External bisector of the C'(prev)-N-CA angle, in that plane.
  Vec3 dir = -(unit(prev_c - n) + unit(ca - n));
  return n + p.len_n_h * unit(dir);
}

Vec3 halpha(const Vec3& n, const Vec3& ca, const Vec3& c, const PeptideGeometryParams& p) {
  // Tetrahedral placement: equal angles acos(-1/3) to both CA bonds,
  // offset from the external bisector along the N-CA-C' plane normal.
  Vec3 u1 = unit(n - ca);
  Vec3 u2 = unit(c - ca);
  Vec3 bisector = -unit(u1 + u2);
  Vec3 normal = unit(u1.cross(u2));
  double cos_half = std::sqrt((1.0 + u1.dot(u2)) / 2.0);
  double cos_beta = (1.0 / 3.0) / cos_half;
  double sin_beta = std::sqrt(std::max(0.0, 1.0 - cos_beta * cos_beta));
  return ca + p.len_ca_ha * (cos_beta * bisector + sin_beta * normal);
}

Vec3 carbonyl_o(const Vec3& n, const Vec3& ca, const Vec3& c, const PeptideGeometryParams& p) {
  return place_atom(n, ca, c, p.len_c_o, kAngCaCO, kTorsionNCaCO);
}

ResidueAtoms first_residue_atoms(const PeptideGeometryParams& p) {
  ResidueAtoms r;
  r.n = Vec3::Zero();
  r.ca = Vec3(p.len_n_ca, 0.0, 0.0);
  double ang = p.ang_n_ca_c * kDegToRad;
  r.c = r.ca + p.len_ca_c * Vec3(-std::cos(ang), std::sin(ang), 0.0);
  // Virtual previous carbonyl: the first residue has no preceding
  // peptide bond, so H is anchored to a C' placed at torsion 180
  // (equivalent to phi_1 = 180 for the H geometry only).
  Vec3 virtual_c0 = place_atom(r.c, r.ca, r.n, p.len_c_n, p.ang_c_n_ca, 180.0);
  r.h = amide_h(virtual_c0, r.n, r.ca, p);
  r.ha = halpha(r.n, r.ca, r.c, p);
  r.o = carbonyl_o(r.n, r.ca, r.c, p);
  return r;
}

ResidueAtoms next_residue_atoms(const ResidueAtoms& last, const DihedralPair& pair,
                                const PeptideGeometryParams& p) {
  ResidueAtoms r;
  r.n = place_atom(last.n, last.ca, last.c, p.len_c_n, p.ang_ca_c_n, pair.psi);
  r.ca = place_atom(last.ca, last.c, r.n, p.len_n_ca, p.ang_c_n_ca, p.omega);
  r.c = place_atom(last.c, r.n, r.ca, p.len_ca_c, p.ang_n_ca_c, pair.phi);
  r.h = amide_h(last.c, r.n, r.ca, p);
  r.ha = halpha(r.n, r.ca, r.c, p);
  r.o = carbonyl_o(r.n, r.ca, r.c, p);
  return r;
}

void require_finite(const DihedralPair& d) {
  if (!std::isfinite(d.phi) || !std::isfinite(d.psi))
    throw std::invalid_argument("dihedral pair with non-finite angle");
}

}  // namespace

double normalize_angle(double deg) {
  double x = std::fmod(deg + 180.0, 360.0);
  if (x < 0.0) x += 360.0;
  return x - 180.0;
}

void PeptideGeometryParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("bond length ") + name + " must be positive");
  };
  positive(len_n_ca, "N-CA");
  positive(len_ca_c, "CA-C");
  positive(len_c_n, "C-N");
  positive(len_n_h, "N-H");
  positive(len_ca_ha, "CA-HA");
  positive(len_c_o, "C-O");
  auto open_angle = [](double v, const char* name) {
    if (!(v > 0.0 && v < 180.0))
      throw std::invalid_argument(std::string("bond angle ") + name +
                                  " must lie in (0, 180)");
  };
  open_angle(ang_n_ca_c, "N-CA-C");
  open_angle(ang_ca_c_n, "CA-C-N");
  open_angle(ang_c_n_ca, "C-N-CA");
  if (std::abs(omega) != 180.0)
    throw std::invalid_argument("omega is fixed trans (180)");
}

BackboneChain::BackboneChain(std::vector<ResidueAtoms> residues, int first_residue)
    : residues_(std::move(residues)), first_(first_residue) {
  if (first_ < 1) throw std::invalid_argument("first residue index must be >= 1");
}

const ResidueAtoms& BackboneChain::residue(int global_index) const {
  if (!has_residue(global_index))
    throw std::out_of_range("residue " + std::to_string(global_index) +
                            " not in chain [" + std::to_string(first_) + ", " +
                            std::to_string(last_residue()) + "]");
  return residues_[static_cast<std::size_t>(global_index - first_)];
}

std::string_view to_string(VectorType t) {
  switch (t) {
    case VectorType::NH: return "NH";
    case VectorType::CAHA: return "CAHA";
    case VectorType::CN: return "CN";
    case VectorType::CAC: return "CAC";
  }
  throw std::invalid_argument("bad vector type value");
}

VectorType vector_type_from_string(std::string_view token) {
  if (token == "NH") return VectorType::NH;
  if (token == "CAHA") return VectorType::CAHA;
  if (token == "CN") return VectorType::CN;
  if (token == "CAC") return VectorType::CAC;
  throw std::invalid_argument("unknown vector type '" + std::string(token) + "'");
}

Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double r, double theta_deg,
                double tau_deg) {
  Vec3 bc = c - b;
  double bc_norm = bc.norm();
  if (bc_norm < 1e-12) throw std::invalid_argument("coincident reference atoms");
  bc /= bc_norm;
  Vec3 n = (b - a).cross(bc);
  double n_norm = n.norm();
  if (n_norm < 1e-12) throw std::invalid_argument("collinear reference atoms");
  n /= n_norm;
  Vec3 m = n.cross(bc);
  double theta = theta_deg * kDegToRad;
  double tau = tau_deg * kDegToRad;
  Vec3 d(-r * std::cos(theta), r * std::sin(theta) * std::cos(tau),
         r * std::sin(theta) * std::sin(tau));
  return c + d.x() * bc + d.y() * m + d.z() * n;
}

double dihedral_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Vec3 b1 = b - a;
  Vec3 b2 = c - b;
  Vec3 b3 = d - c;
  Vec3 n1 = b1.cross(b2);
  Vec3 n2 = b2.cross(b3);
  double x = n1.dot(n2);
  double y = n1.cross(n2).dot(unit(b2));
  return normalize_angle(std::atan2(y, x) * kRadToDeg);
}

BackboneChain build_backbone(std::span<const DihedralPair> dihedrals, int n_residues,
                             const PeptideGeometryParams& params, int first_residue) {
  params.validate();
  if (n_residues < 2) throw std::invalid_argument("a chain needs at least 2 residues");
  if (static_cast<int>(dihedrals.size()) != n_residues - 1)
    throw std::invalid_argument("expected " + std::to_string(n_residues - 1) +
                                " dihedral pairs, got " + std::to_string(dihedrals.size()));
  std::vector<ResidueAtoms> residues;
  residues.reserve(static_cast<std::size_t>(n_residues));
  residues.push_back(first_residue_atoms(params));
  for (const DihedralPair& pair : dihedrals) {
    require_finite(pair);
    residues.push_back(next_residue_atoms(residues.back(), pair, params));
  }
  return BackboneChain(std::move(residues), first_residue);
}

BackboneChain append_residue(const BackboneChain& chain, const DihedralPair& pair,
                             const PeptideGeometryParams& params) {
  if (chain.empty()) throw std::invalid_argument("cannot extend an empty chain");
  require_finite(pair);
  std::vector<ResidueAtoms> residues = chain.residues();
  residues.push_back(next_residue_atoms(residues.back(), pair, params));
  return BackboneChain(std::move(residues), chain.first_residue());
}

std::vector<DihedralPair> extract_dihedrals(const BackboneChain& chain) {
  if (chain.size() < 2) throw std::invalid_argument("chain has no dihedral pairs");
  std::vector<DihedralPair> out;
  out.reserve(static_cast<std::size_t>(chain.size() - 1));
  const auto& rs = chain.residues();
  for (std::size_t k = 0; k + 1 < rs.size(); ++k) {
    double psi = dihedral_angle(rs[k].n, rs[k].ca, rs[k].c, rs[k + 1].n);
    double phi = dihedral_angle(rs[k].c, rs[k + 1].n, rs[k + 1].ca, rs[k + 1].c);
    out.emplace_back(phi, psi);
  }
  return out;
}

Vec3 internuclear_unit_vector(const BackboneChain& chain, int residue_index, VectorType type) {
  const ResidueAtoms& r = chain.residue(residue_index);
  switch (type) {
    case VectorType::NH: return unit(r.h - r.n);
    case VectorType::CAHA: return unit(r.ha - r.ca);
    case VectorType::CAC: return unit(r.c - r.ca);
    case VectorType::CN: return unit(chain.residue(residue_index + 1).n - r.c);
  }
  throw std::invalid_argument("bad vector type value");
}

void write_backbone(std::ostream& out, const BackboneChain& chain) {
  out << "# rdc-fold backbone N=" << chain.size() << "\n";
  static constexpr const char* kNames[6] = {"N", "H", "CA", "HA", "C", "O"};
  char buf[160];
  for (int i = 0; i < chain.size(); ++i) {
    int res = chain.first_residue() + i;
    const ResidueAtoms& r = chain.residues()[static_cast<std::size_t>(i)];
    const Vec3* atoms[6] = {&r.n, &r.h, &r.ca, &r.ha, &r.c, &r.o};
    for (int a = 0; a < 6; ++a) {
      std::snprintf(buf, sizeof buf, "%d %s %.6f %.6f %.6f\n", res, kNames[a], atoms[a]->x(),
                    atoms[a]->y(), atoms[a]->z());
      out << buf;
    }
  }
  if (!out) throw std::runtime_error("backbone write failed");
}

void write_backbone_file(const std::string& path, const BackboneChain& chain) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_backbone(out, chain);
}

BackboneChain parse_backbone(std::istream& in, const std::string& name) {
  std::string line;
  int line_no = 0;
  std::map<int, ResidueAtoms> residues;
  std::map<int, int> seen_atoms;  // residue -> bitmask of parsed atoms
  auto context = [&] { return name + ":" + std::to_string(line_no); };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string res_tok, atom;
    std::string xs, ys, zs;
    if (!(fields >> res_tok >> atom >> xs >> ys >> zs))
      throw std::invalid_argument(context() + ": expected 'res atom x y z'");
    int res = static_cast<int>(parse_long(res_tok, context()));
    Vec3 v(parse_double(xs, context()), parse_double(ys, context()),
           parse_double(zs, context()));
    ResidueAtoms& r = residues[res];
    int bit;
    if (atom == "N") { r.n = v; bit = 1; }
    else if (atom == "H") { r.h = v; bit = 2; }
    else if (atom == "CA") { r.ca = v; bit = 4; }
    else if (atom == "HA") { r.ha = v; bit = 8; }
    else if (atom == "C") { r.c = v; bit = 16; }
    else if (atom == "O") { r.o = v; bit = 32; }
    else throw std::invalid_argument(context() + ": unknown atom name '" + atom + "'");
    seen_atoms[res] |= bit;
  }
  if (residues.empty()) throw std::invalid_argument(name + ": no atoms found");
  int first = residues.begin()->first;
  std::vector<ResidueAtoms> ordered;
  ordered.reserve(residues.size());
  int expect = first;
  for (const auto& [res, atoms] : residues) {
    if (res != expect)
      throw std::invalid_argument(name + ": residue indices not contiguous at " +
                                  std::to_string(res));
    if (seen_atoms[res] != 63)
      throw std::invalid_argument(name + ": residue " + std::to_string(res) +
                                  " is missing atoms");
    ordered.push_back(atoms);
    ++expect;
  }
  return BackboneChain(std::move(ordered), first);
}

BackboneChain parse_backbone_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_backbone(in, path);
}

}  // namespace rdcfold
