#pragma once

#include "rdcfold/geometry.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdcfold {

enum class ResidueClass { General = 0, Glycine = 1, Proline = 2 };

std::string_view to_string(ResidueClass c);
/// Throws std::invalid_argument naming the token when it is unknown.
ResidueClass residue_class_from_string(std::string_view token);
/// One-letter code: 'G' -> Glycine, 'P' -> Proline, anything else General.
ResidueClass residue_class_from_char(char code);

/// Axis-aligned allowed region; min edges inclusive, max exclusive.
struct RamaRect {
  double phi_min = 0, phi_max = 0, psi_min = 0, psi_max = 0;

  bool contains(const DihedralPair& d) const {
    return d.phi >= phi_min && d.phi < phi_max && d.psi >= psi_min && d.psi < psi_max;
  }
};

/// Union-of-rectangles Ramachandran map per residue class.
class RamachandranTable {
 public:
  /// Coarse built-in regions (helix, sheet, extended for general;
  /// a mirrored region added for glycine; proline clipped to
  /// phi in [-100, -30)).
  static RamachandranTable default_table();

  void add_region(ResidueClass c, const RamaRect& r);
  const std::vector<RamaRect>& regions(ResidueClass c) const;

  /// Throws std::invalid_argument when a class has no regions or a
  /// rectangle leaves [-180, 180)^2 or is inverted.
  void validate() const;

 private:
  std::map<ResidueClass, std::vector<RamaRect>> regions_;
};

/// True iff d lies in any allowed rectangle for the class.
bool ramachandran_pass(const DihedralPair& d, ResidueClass c, const RamachandranTable& table);

struct KarplusCoefficients {
  double a = 6.51;   // Hz
  double b = -1.76;  // Hz
  double c = 1.60;   // Hz
  double phase_offset = -60.0;  // degrees; theta = phi + offset

  void validate() const;  // finite values
};

/// Three-bond scalar coupling J(phi) = A cos^2(theta) + B cos(theta) + C.
double karplus_coupling(double phi_deg, const KarplusCoefficients& coeffs);

struct ScalarCouplingRecord {
  int residue_index = 0;
  double j_value = 0.0;     // Hz
  double tolerance = 1.0;   // Hz, > 0
};

/// Keeps d iff ramachandran_pass(d) and, when a coupling is given,
/// |karplus_coupling(d.phi) - J| <= tolerance. Order-preserving.
std::vector<DihedralPair> filter_grid(std::span<const DihedralPair> grid, ResidueClass c,
                                      const RamachandranTable& table,
                                      const std::optional<ScalarCouplingRecord>& coupling,
                                      const KarplusCoefficients& coeffs);

// Table file: lines `class phi_min phi_max psi_min psi_max`, `#` comments.
RamachandranTable parse_rama_table(std::istream& in, const std::string& name = "<stream>");
RamachandranTable parse_rama_file(const std::string& path);
void write_rama_table(std::ostream& out, const RamachandranTable& table);

// Coupling file: lines `res_index J tolerance`, `#` comments.
std::vector<ScalarCouplingRecord> parse_coupling_table(std::istream& in,
                                                       const std::string& name = "<stream>");
std::vector<ScalarCouplingRecord> parse_coupling_file(const std::string& path);

}  // namespace rdcfold
