#pragma once

#include "rdcfold/geometry.hpp"
#include "rdcfold/rdc.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rdcfold {

/// The six barrier-delimited phases of one Stage 2 iteration, in
/// pipeline order.
enum class SectionLabel {
  Formatted = 0,    // beam/candidate list preparation and truncation
  CrossedRead = 1,  // cross-product setup over beam x candidates
  Scattered = 2,    // chunk hand-off to workers
  Calculated = 3,   // fitness evaluation (per worker)
  Gathered = 4,     // result collection at the head
  Sorted = 5,       // local sorts and the head merge / full sort
};
inline constexpr int kSectionCount = 6;

std::string_view to_string(SectionLabel label);

/// Worker id used for samples taken by the orchestrator itself.
inline constexpr int kHeadWorker = -1;

struct SectionTiming {
  int iteration = 0;
  int worker = kHeadWorker;
  SectionLabel label = SectionLabel::Formatted;
  double seconds = 0.0;
};

using SteadyTime = std::chrono::steady_clock::time_point;

/// Append-only timing log. Thread-safe; records are a few per worker per
/// iteration, so one mutex is plenty.
class TimingLog {
 public:
  void record(int iteration, int worker, SectionLabel label, double seconds);
  void record_section(int iteration, int worker, SectionLabel label, SteadyTime start,
                      SteadyTime end);
  std::vector<SectionTiming> snapshot() const;
  bool empty() const;

 private:
  mutable std::mutex mu_;
  std::vector<SectionTiming> entries_;
};

/// Monotonic-clock stopwatch.
class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  SteadyTime start_time() const { return start_; }

 private:
  SteadyTime start_;
};

/// Per-iteration cross/communication statistics.
struct IterationStats {
  std::size_t m1 = 0;
  std::size_t m2 = 0;
  std::size_t combinations = 0;
  std::uint64_t scatter_bytes = 0;  // codec size of all scattered chunk payloads
  std::uint64_t gather_bytes = 0;   // codec size of all gathered result frames
  std::uint64_t messages = 0;       // head <-> worker transfers
};

struct RunReport {
  // configuration echo
  int n_residues = 0;
  std::uint64_t depth = 0;
  int np = 1;
  double resolution = 0.0;
  int media_count = 0;
  bool legacy_io = false;
  bool local_sort = true;
  bool merge_tree = false;

  // per-iteration series (aligned with `iterations`)
  std::vector<int> iterations;
  std::array<std::vector<double>, kSectionCount> sections;  // max over workers
  std::array<double, kSectionCount> mean_seconds{};         // mean over iterations
  std::vector<IterationStats> stats;

  // totals
  std::uint64_t stage1_evaluations = 0;
  std::uint64_t stage2_evaluations = 0;
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;
  double total_wall_seconds = 0.0;
  std::uint64_t io_reads = 0;
  std::uint64_t io_writes = 0;
  std::uint64_t io_setup_writes = 0;
  double best_score = 0.0;

  std::vector<std::string> warnings;
};

/// Per label and iteration: max over workers; then mean over iterations.
/// Labels absent from an iteration count as 0 and add a warning.
RunReport aggregate_report(const TimingLog& log);

// Report serialization: JSON (machine), table (human), CSV (plot series).
void write_report_json(std::ostream& out, const RunReport& report);
RunReport parse_report_json(std::istream& in, const std::string& name = "<stream>");
void write_report_json_file(const std::string& path, const RunReport& report);
RunReport parse_report_json_file(const std::string& path);
void write_report_table(std::ostream& out, const RunReport& report);
void write_report_csv(std::ostream& out, const RunReport& report);

/// t(np) = sr / np + op, fitted by least squares.
struct SpeedupModel {
  double sr = 0.0;        // seconds of perfectly divisible work
  double op = 0.0;        // fixed overhead, clamped to >= 0
  double residual = 0.0;  // rms of fit residuals
};

/// Requires at least two distinct np samples; throws
/// std::invalid_argument otherwise.
SpeedupModel fit_speedup_model(std::span<const std::pair<int, double>> samples);

/// Counters for the file-mediated fitness mode. Reads/writes cover the
/// per-evaluation pipeline only; writing the two static inputs at setup
/// is tallied separately.
struct IoTallySnapshot {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t setup_writes = 0;
  std::uint64_t evaluations = 0;
};

/// Fitness evaluator that routes every score through the historical
/// file-based data flow: per medium, write the fragment coordinates,
/// then read geometry, coordinates and RDC data, write and read back the
/// design matrix, write and read back the solution: 5 reads + 3 writes
/// per medium per evaluation. Scores match fragment_fitness bitwise
/// (payloads are serialized at full precision).
class LegacyIoRunner {
 public:
  /// Writes the static geometry and per-medium RDC files into
  /// scratch_dir (must exist and be writable).
  LegacyIoRunner(std::string scratch_dir, std::span<const RdcRecord> data,
                 const VectorTypeParams& params, const PeptideGeometryParams& geometry);

  /// Concurrent calls must use distinct worker ids.
  FitnessScore evaluate(const BackboneChain& chain, int worker_id = 0);

  IoTallySnapshot tally() const;
  const std::string& scratch_dir() const { return scratch_; }

 private:
  std::string scratch_;
  std::vector<RdcRecord> data_;
  std::vector<int> medium_ids_;
  VectorTypeParams params_;
  std::atomic<std::uint64_t> reads_{0};
  std::atomic<std::uint64_t> writes_{0};
  std::uint64_t setup_writes_ = 0;
  std::atomic<std::uint64_t> evaluations_{0};
};

/// One-shot convenience around LegacyIoRunner.
FitnessScore legacy_io_fitness(const BackboneChain& chain, std::span<const RdcRecord> data,
                               const VectorTypeParams& params, const std::string& scratch_dir,
                               const PeptideGeometryParams& geometry = {});

}  // namespace rdcfold
