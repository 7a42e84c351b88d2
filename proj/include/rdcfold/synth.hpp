#pragma once

#include "rdcfold/filters.hpp"
#include "rdcfold/geometry.hpp"
#include "rdcfold/rdc.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rdcfold {

/// Seeded generator with a fixed algorithm so identical seeds give
/// byte-identical datasets across platforms and library versions.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform01();                      // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  std::uint64_t below(std::uint64_t n);    // [0, n), unbiased
  double gaussian();                       // standard normal (polar method)

 private:
  std::mt19937_64 engine_;  // sequence fixed by the standard
};

/// Ground truth behind a synthetic dataset.
struct SyntheticTruth {
  int n_residues = 0;
  int media = 0;
  double sigma = 0.0;  // Hz of added Gaussian noise
  std::uint64_t seed = 0;
  std::optional<double> grid_resolution;  // dihedrals snapped to this grid
  std::vector<DihedralPair> dihedrals;    // n_residues - 1 pairs
  std::vector<OrderTensor> tensors;       // per medium, ids 1..media
  std::vector<RdcRecord> records;
  BackboneChain chain;
};

/// Draws Ramachandran-passing dihedrals (snapped to the grid when a
/// resolution is given), random well-conditioned alignment tensors
/// (|Szz| in [2e-4, 1e-3], rhombicity <= 2/3), builds the chain and
/// back-calculates NH, CAHA, CAC (and CN up to the second-to-last
/// residue) per medium, adding Gaussian noise sigma. Record error is
/// sigma when positive, 1 otherwise. Fully reproducible from the seed.
SyntheticTruth synthesize_dataset(int n_residues, std::optional<double> grid_resolution,
                                  int media, double sigma, std::uint64_t seed,
                                  const PeptideGeometryParams& geometry = {},
                                  const VectorTypeParams& params = {},
                                  const RamachandranTable& table = RamachandranTable::default_table());

// Truth file: `# truth N=<n> media=<k> sigma=<s> seed=<seed>` header,
// `pair <i> <phi> <psi>` and `tensor <medium> <s1..s5>` lines, full
// precision.
void write_truth(std::ostream& out, const SyntheticTruth& truth);
void write_truth_file(const std::string& path, const SyntheticTruth& truth);
/// Restores dihedrals/tensors/metadata and rebuilds the chain; records
/// are not stored in the truth file (they live in the RDC file).
SyntheticTruth parse_truth(std::istream& in, const std::string& name = "<stream>",
                           const PeptideGeometryParams& geometry = {});
SyntheticTruth parse_truth_file(const std::string& path,
                                const PeptideGeometryParams& geometry = {});

}  // namespace rdcfold
