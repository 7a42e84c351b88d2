#pragma once

#include "rdcfold/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rdcfold {

/// A scored partial conformation: one dihedral pair per placed residue
/// beyond the first, plus the fragment fitness (lower is better).
struct BeamEntry {
  std::vector<DihedralPair> dihedrals;
  double score = 0.0;

  friend bool operator==(const BeamEntry&, const BeamEntry&) = default;
};

/// Global beam order: ascending score, ties broken by lexicographic
/// dihedral sequence. Total, so sorting is deterministic regardless of
/// worker count or merge order.
bool beam_less(const BeamEntry& a, const BeamEntry& b);

/// One scored Stage 1 grid point.
struct ScoredPair {
  DihedralPair pair;
  double score = 0.0;

  friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

/// Stage 1 output for one residue pair: candidate (phi, psi) values
/// sorted ascending by (score, lexicographic pair).
struct AngleCandidateList {
  int pair_index = 0;        // joins residues pair_index, pair_index + 1
  double resolution = 0.0;   // grid resolution the list was generated at
  bool fitness_fallback = false;  // true when scores are the 0 sentinel
  std::vector<ScoredPair> entries;

  std::size_t size() const { return entries.size(); }
};

/// Cross-product shape of one Stage 2 iteration.
struct CrossStats {
  std::size_t m1 = 0;  // carried beam length
  std::size_t m2 = 0;  // incoming candidate list length
  std::size_t combinations() const { return m1 * m2; }
};

/// Lazy view of the beam x candidate cross product, in i-major j-minor
/// order: element k extends beam[k / m2] with candidates[k % m2]. Avoids
/// materializing m1*m2 dihedral vectors; workers index into it by range.
class CrossView {
 public:
  CrossView(const std::vector<BeamEntry>& beam, const AngleCandidateList& candidates);

  std::size_t size() const { return stats_.combinations(); }
  CrossStats stats() const { return stats_; }
  std::size_t beam_index(std::size_t k) const { return k / stats_.m2; }
  const BeamEntry& parent(std::size_t k) const { return (*beam_)[k / stats_.m2]; }
  const DihedralPair& extension(std::size_t k) const {
    return (*candidates_)[k % stats_.m2].pair;
  }
  /// Materializes element k with the parent's score carried over.
  BeamEntry entry(std::size_t k) const;

 private:
  const std::vector<BeamEntry>* beam_;
  const std::vector<ScoredPair>* candidates_;
  CrossStats stats_;
};

/// Materialized cross product (element order as in CrossView). Entries
/// carry the parent score until rescored.
struct CrossResult {
  std::vector<BeamEntry> entries;
  CrossStats stats;
};
CrossResult cross_lists(const std::vector<BeamEntry>& beam, const AngleCandidateList& candidates);

}  // namespace rdcfold
