#include "rdcfold/beam.hpp"

#include <stdexcept>

namespace rdcfold {

bool beam_less(const BeamEntry& a, const BeamEntry& b) {
  if (a.score != b.score) return a.score < b.score;
  const std::size_t n = std::min(a.dihedrals.size(), b.dihedrals.size());
  for (std::size_t i = 0; i < n; ++i) {
    const DihedralPair& x = a.dihedrals[i];
    const DihedralPair& y = b.dihedrals[i];
    if (x.phi != y.phi) return x.phi < y.phi;
    if (x.psi != y.psi) return x.psi < y.psi;
  }
  return a.dihedrals.size() < b.dihedrals.size();
}

CrossView::CrossView(const std::vector<BeamEntry>& beam, const AngleCandidateList& candidates)
    : beam_(&beam), candidates_(&candidates.entries) {
  if (beam.empty()) throw std::invalid_argument("cannot cross an empty beam");
  if (candidates.entries.empty())
    throw std::invalid_argument("cannot cross an empty candidate list");
  stats_.m1 = beam.size();
  stats_.m2 = candidates.entries.size();
}

BeamEntry CrossView::entry(std::size_t k) const {
  const BeamEntry& p = parent(k);
  BeamEntry e;
  e.dihedrals.reserve(p.dihedrals.size() + 1);
  e.dihedrals = p.dihedrals;
  e.dihedrals.push_back(extension(k));
  e.score = p.score;
  return e;
}

CrossResult cross_lists(const std::vector<BeamEntry>& beam,
                        const AngleCandidateList& candidates) {
  CrossView view(beam, candidates);
  CrossResult result;
  result.stats = view.stats();
  result.entries.reserve(view.size());
  for (std::size_t k = 0; k < view.size(); ++k) result.entries.push_back(view.entry(k));
  return result;
}

}  // namespace rdcfold
