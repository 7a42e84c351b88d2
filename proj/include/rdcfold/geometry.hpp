#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rdcfold {

using Vec3 = Eigen::Vector3d;

/// Maps any angle in degrees onto [-180, 180); 180 maps to -180.
double normalize_angle(double deg);

/// A (phi, psi) torsion pair in degrees, the atomic unit of the search
/// space. Pair k joins residues k and k+1: psi is the psi torsion of
/// residue k (it places N of residue k+1), phi is the phi torsion of
/// residue k+1. Angles are normalized to [-180, 180) on construction.
struct DihedralPair {
  double phi = 0.0;
  double psi = 0.0;

  DihedralPair() = default;
  DihedralPair(double phi_deg, double psi_deg)
      : phi(normalize_angle(phi_deg)), psi(normalize_angle(psi_deg)) {}

  friend bool operator==(const DihedralPair&, const DihedralPair&) = default;
};

/// Lexicographic (phi, psi) order; the tie-break component of the beam order.
inline bool lex_less(const DihedralPair& a, const DihedralPair& b) {
  if (a.phi != b.phi) return a.phi < b.phi;
  return a.psi < b.psi;
}

/// Ideal peptide geometry. Defaults are Engh-Huber-style values; all of
/// them can be overridden before building chains.
struct PeptideGeometryParams {
  // bond lengths (Angstrom)
  double len_n_ca = 1.458;
  double len_ca_c = 1.525;
  double len_c_n = 1.329;  // peptide bond C'(i) - N(i+1)
  double len_n_h = 1.01;
  double len_ca_ha = 1.09;
  double len_c_o = 1.231;
  // bond angles (degrees)
  double ang_n_ca_c = 111.2;
  double ang_ca_c_n = 116.2;
  double ang_c_n_ca = 121.7;
  // peptide bond torsion (degrees), fixed trans
  double omega = 180.0;

  /// Throws std::invalid_argument on non-positive lengths or angles
  /// outside (0, 180).
  void validate() const;
};

/// Backbone atoms of one residue (glycine-like model: no side chain
/// beyond HA).
struct ResidueAtoms {
  Vec3 n, h, ca, ha, c, o;
};

/// Backbone Cartesian coordinates built from a dihedral sequence.
/// Residue indices are global and 1-based; a chain may represent a
/// fragment of a larger protein starting at first_residue() > 1.
class BackboneChain {
 public:
  BackboneChain() = default;
  BackboneChain(std::vector<ResidueAtoms> residues, int first_residue);

  int size() const { return static_cast<int>(residues_.size()); }
  bool empty() const { return residues_.empty(); }
  int first_residue() const { return first_; }
  int last_residue() const { return first_ + size() - 1; }
  bool has_residue(int global_index) const {
    return global_index >= first_ && global_index <= last_residue();
  }
  /// Throws std::out_of_range when the residue is not part of the chain.
  const ResidueAtoms& residue(int global_index) const;
  const std::vector<ResidueAtoms>& residues() const { return residues_; }

 private:
  std::vector<ResidueAtoms> residues_;
  int first_ = 1;
};

/// Internuclear vector kinds scored against RDC data. CN spans from C'
/// of a residue to N of the next one; the rest are intra-residue.
enum class VectorType { NH = 0, CAHA = 1, CN = 2, CAC = 3 };
inline constexpr int kVectorTypeCount = 4;

std::string_view to_string(VectorType t);
/// Throws std::invalid_argument naming the token when it is unknown.
VectorType vector_type_from_string(std::string_view token);

/// Builds an n_residues chain from n_residues - 1 dihedral pairs. The
/// first residue sits in the canonical frame: N at the origin, CA on +x,
/// C' in the xy-plane with positive y. Deterministic.
BackboneChain build_backbone(std::span<const DihedralPair> dihedrals, int n_residues,
                             const PeptideGeometryParams& params, int first_residue = 1);

/// Extends the chain by one residue. Equivalent to build_backbone on the
/// concatenated dihedral list; coordinates of existing residues are
/// preserved bitwise.
BackboneChain append_residue(const BackboneChain& chain, const DihedralPair& pair,
                             const PeptideGeometryParams& params);

/// Recovers the (phi, psi) pair sequence from chain coordinates.
std::vector<DihedralPair> extract_dihedrals(const BackboneChain& chain);

/// Unit vector from the first to the second atom of `type` at the given
/// global residue index.
Vec3 internuclear_unit_vector(const BackboneChain& chain, int residue_index, VectorType type);

/// Places D such that |D - C| = r, angle(B, C, D) = theta_deg and
/// dihedral(A, B, C, D) = tau_deg.
Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double r, double theta_deg,
                double tau_deg);

/// Signed torsion angle in degrees, in [-180, 180).
double dihedral_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Coordinate file: header `# rdc-fold backbone N=<count>`, then one line
// per atom: `res_index atom_name x y z` with 6 decimal places.
void write_backbone(std::ostream& out, const BackboneChain& chain);
void write_backbone_file(const std::string& path, const BackboneChain& chain);
BackboneChain parse_backbone(std::istream& in, const std::string& name = "<stream>");
BackboneChain parse_backbone_file(const std::string& path);

}  // namespace rdcfold
