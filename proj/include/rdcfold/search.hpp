#pragma once

#include "rdcfold/beam.hpp"
#include "rdcfold/filters.hpp"
#include "rdcfold/instrument.hpp"
#include "rdcfold/parallel.hpp"
#include "rdcfold/rdc.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdcfold {

struct SearchConfig {
  double resolution = 10.0;   // R, degrees
  std::uint64_t depth = 1000; // M, beam width
  int n_residues = 0;         // N
  std::string sequence;       // one-letter residue codes; empty = all general

  /// Throws std::invalid_argument on R outside (0, 360], M < 1, N < 2 or
  /// a sequence whose length is neither 0 nor N.
  void validate() const;
  /// True when R divides 360 evenly (the preferred configuration).
  bool resolution_divides_circle() const;
  ResidueClass class_of(int residue_index) const;  // 1-based
};

/// Full (phi, psi) grid at resolution R: phi outer, psi inner, each axis
/// {-180, -180+R, ...} up to but excluding 180.
std::vector<DihedralPair> generate_dihedral_grid(double resolution_deg);

struct FilterInputs {
  RamachandranTable table = RamachandranTable::default_table();
  KarplusCoefficients karplus;
  std::vector<ScalarCouplingRecord> couplings;  // at most one per residue

  /// Coupling record for the pair's second residue (whose phi the pair
  /// carries), if any.
  std::optional<ScalarCouplingRecord> coupling_for(int residue_index) const;
};

struct Stage1Result {
  std::vector<AngleCandidateList> lists;  // one per pair 1..N-1
  std::uint64_t evaluations = 0;          // fitness calls performed
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

/// Stage 1: per pair (i, i+1), filter the grid for residue i+1's class,
/// score each survivor on the 2-residue fragment, sort ascending and
/// truncate to M. An empty post-filter grid falls back to the unfiltered
/// grid (with a warning); a pair whose media cannot support a tensor fit
/// falls back to filter order with score 0 (flagged). Scores are
/// collapsed to the 9-significant-digit interchange precision so the
/// in-memory hand-off and the file round trip order identically.
Stage1Result stage1(const SearchConfig& config, std::span<const RdcRecord> data,
                    const FilterInputs& filters, const VectorTypeParams& params,
                    const PeptideGeometryParams& geometry);

// Angle-list file: header `# pair <i> resolution <R>`, lines
// `phi psi score` (9 significant digits), sorted ascending.
void write_angle_list(std::ostream& out, const AngleCandidateList& list);
void write_angle_list_file(const std::string& path, const AngleCandidateList& list);
AngleCandidateList parse_angle_list(std::istream& in, const std::string& name = "<stream>");
AngleCandidateList parse_angle_list_file(const std::string& path);
/// stage1 output file name for one pair, e.g. "pair_003.list".
std::string angle_list_filename(int pair_index);

// Beam checkpoint file: lines `score phi1 psi1 phi2 psi2 ...`
// (9 significant digits).
void write_beam(std::ostream& out, std::span<const BeamEntry> beam);
void write_beam_file(const std::string& path, std::span<const BeamEntry> beam);
std::vector<BeamEntry> parse_beam(std::istream& in, const std::string& name = "<stream>");
std::vector<BeamEntry> parse_beam_file(const std::string& path);

/// One Stage 2 iteration: truncate candidates to M, cross with the
/// beam, evaluate every combination through the engine, sort by the
/// global order, truncate to M.
std::vector<BeamEntry> stage2_iteration(const std::vector<BeamEntry>& beam,
                                        const AngleCandidateList& candidates,
                                        std::uint64_t depth, const EvalContext& ctx,
                                        WorkerPool& pool, const EngineOptions& options = {},
                                        TimingLog* log = nullptr, int iteration = 0,
                                        IterationStats* stats = nullptr);

struct FoldOptions {
  EngineOptions engine;
  /// When set, the fitness of every combination is routed through this
  /// file-mediated evaluator instead of the in-memory path.
  LegacyIoRunner* legacy = nullptr;
  /// Directory for per-iteration beam checkpoint files; empty = none.
  std::string checkpoint_dir;
};

struct FoldResult {
  BeamEntry best;
  BackboneChain chain;
  RunReport report;
  std::vector<BeamEntry> final_beam;
};

/// Stage 2: seed the beam from the first pair's list, then iterate
/// stage2_iteration over pairs 2..N-1. Iteration k adds residue k+2; its
/// six sections are timed per worker. Any iteration failure is rethrown
/// with the iteration index in the message.
FoldResult fold(const SearchConfig& config, std::span<const RdcRecord> data,
                const std::vector<AngleCandidateList>& stage1_lists,
                const VectorTypeParams& params, const PeptideGeometryParams& geometry,
                WorkerPool& pool, const FoldOptions& options = {});

/// Exact size of the full search space, (axis count)^(2(N-1)) where the
/// axis count is the number of grid values per angle at resolution R.
struct SearchSpaceEstimate {
  std::string digits;   // exact decimal integer
  double log10 = 0.0;
};
SearchSpaceEstimate total_search_space(double resolution, int n_residues);

/// Beam-bounded evaluation count (N-1) * M^2; throws std::overflow_error
/// when it exceeds 64 bits.
std::uint64_t bounded_evaluations(int n_residues, std::uint64_t depth);

}  // namespace rdcfold
