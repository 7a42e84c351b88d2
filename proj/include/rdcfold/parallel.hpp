#pragma once

#include "rdcfold/beam.hpp"
#include "rdcfold/instrument.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rdcfold {

/// Half-open index range into a crossed combination list.
struct WorkChunk {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
};

/// Contiguous balanced partition of [0, total): the first (total mod np)
/// chunks get the ceiling share, the rest the floor share.
std::vector<WorkChunk> scatter(std::size_t total, int np);

/// Raised on the head when a worker's job threw; carries the worker id.
class WorkerFailure : public std::runtime_error {
 public:
  WorkerFailure(int worker_id, const std::string& what)
      : std::runtime_error(what), worker_id(worker_id) {}
  int worker_id;
};

/// Fixed pool of np workers driven by an orchestrator thread. run_all
/// executes one job per worker and acts as a barrier: it returns only
/// after every worker finished. Worker exceptions abort the pass and
/// surface as WorkerFailure; results of the pass are discarded by the
/// caller in that case.
class WorkerPool {
 public:
  explicit WorkerPool(int np);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int size() const { return np_; }
  void run_all(const std::function<void(int worker)>& job);

 private:
  struct State;
  int np_;
  std::unique_ptr<State> state_;
};

/// How one evaluation pipeline pass scores a fragment. The chain passed
/// to score() is the parent conformation extended by the candidate pair.
struct EvalContext {
  PeptideGeometryParams geometry;
  int n_residues_target = 0;  // informational; chains grow toward this
  /// Must be pure w.r.t. the chain (same chain -> same score) and safe
  /// to call concurrently with distinct worker ids.
  std::function<double(const BackboneChain& chain, int worker)> score;
};

/// Scores every combination in [chunk.begin, chunk.end) of the view and
/// returns the extended entries sorted by the global beam order. The
/// parent prefix chain is rebuilt once per distinct beam index.
std::vector<BeamEntry> evaluate_chunk(const CrossView& view, WorkChunk chunk,
                                      const EvalContext& ctx, int worker = 0);

/// Stable linear merge of two lists sorted by the global beam order.
std::vector<BeamEntry> merge_sorted(const std::vector<BeamEntry>& a,
                                    const std::vector<BeamEntry>& b);
std::vector<BeamEntry> merge_sorted(std::vector<BeamEntry>&& a, std::vector<BeamEntry>&& b);

struct EngineOptions {
  /// Workers sort their own chunk and the head merges (the fast path).
  /// When false the head performs one full sort over the gathered lists.
  bool local_sort = true;
  /// Merge gathered lists pairwise in ceil(log2 np) levels instead of
  /// folding left to right. Output is identical either way.
  bool merge_tree = false;
};

/// One parallel evaluate-and-sort pass: scatter chunk ranges, evaluate
/// concurrently, gather in worker order, merge (or full-sort) at the
/// head. Output is bitwise identical to the np=1 sequential path for
/// every np. Section timings land in `log` (when given) under
/// `iteration`; message accounting lands in `stats`.
std::vector<BeamEntry> parallel_evaluate_and_sort(const CrossView& view, WorkerPool& pool,
                                                  const EvalContext& ctx,
                                                  const EngineOptions& options = {},
                                                  TimingLog* log = nullptr, int iteration = 0,
                                                  IterationStats* stats = nullptr);

// Message frames for an out-of-process transport (little-endian):
//   combinations: [u32 count] + per entry [f64 score][u16 n_pairs][f64 x 2*n_pairs]
//   results:      [u32 count] + per entry [f64 score][u64 combination_index]
// The in-process engine ships pointers instead but accounts sizes with
// these codecs; encode/decode round-trip exactly.
std::vector<std::uint8_t> encode_entries(std::span<const BeamEntry> entries);
std::vector<BeamEntry> decode_entries(std::span<const std::uint8_t> frame);
std::uint64_t encoded_entries_size(std::size_t count, std::size_t n_pairs);

using ScoredIndex = std::pair<double, std::uint64_t>;
std::vector<std::uint8_t> encode_results(std::span<const ScoredIndex> results);
std::vector<ScoredIndex> decode_results(std::span<const std::uint8_t> frame);
std::uint64_t encoded_results_size(std::size_t count);

}  // namespace rdcfold
