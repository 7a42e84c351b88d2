#include "rdcfold/search.hpp"

#include "rdcfold/textio.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace rdcfold {

namespace {

/// Quantized copy of an already-normalized angle, folded back into
/// [-180, 180) should 9-digit rounding land exactly on 180.
double quantize_angle(double v) {
  double q = quantize_g9(v);
  if (q >= 180.0) q -= 360.0;
  if (q < -180.0) q += 360.0;
  return q;
}

bool scored_pair_less(const ScoredPair& a, const ScoredPair& b) {
  if (a.score != b.score) return a.score < b.score;
  return lex_less(a.pair, b.pair);
}

std::vector<double> grid_axis(double resolution) {
  std::vector<double> axis;
  for (int k = 0;; ++k) {
    double v = -180.0 + k * resolution;
    if (v >= 180.0 - 1e-9) break;
    axis.push_back(v);
  }
  return axis;
}

}  // namespace

void SearchConfig::validate() const {
  if (!(resolution > 0.0) || !(resolution <= 360.0) || !std::isfinite(resolution))
    throw std::invalid_argument("resolution must lie in (0, 360]");
  if (depth < 1) throw std::invalid_argument("search depth must be >= 1");
  if (n_residues < 2) throw std::invalid_argument("residue count must be >= 2");
  if (!sequence.empty() && static_cast<int>(sequence.size()) != n_residues)
    throw std::invalid_argument("sequence length " + std::to_string(sequence.size()) +
                                " does not match residue count " +
                                std::to_string(n_residues));
}

bool SearchConfig::resolution_divides_circle() const {
  double ratio = 360.0 / resolution;
  return std::abs(ratio - std::round(ratio)) < 1e-9;
}

ResidueClass SearchConfig::class_of(int residue_index) const {
  if (residue_index < 1 || residue_index > n_residues)
    throw std::out_of_range("residue index " + std::to_string(residue_index) +
                            " outside 1.." + std::to_string(n_residues));
  if (sequence.empty()) return ResidueClass::General;
  return residue_class_from_char(sequence[static_cast<std::size_t>(residue_index - 1)]);
}

std::vector<DihedralPair> generate_dihedral_grid(double resolution_deg) {
  if (!(resolution_deg > 0.0) || !(resolution_deg <= 360.0) || !std::isfinite(resolution_deg))
    throw std::invalid_argument("resolution must lie in (0, 360]");
  const std::vector<double> axis = grid_axis(resolution_deg);
  std::vector<DihedralPair> grid;
  grid.reserve(axis.size() * axis.size());
  for (double phi : axis)
    for (double psi : axis) grid.emplace_back(phi, psi);
  return grid;
}

std::optional<ScalarCouplingRecord> FilterInputs::coupling_for(int residue_index) const {
  for (const ScalarCouplingRecord& rec : couplings)
    if (rec.residue_index == residue_index) return rec;
  return std::nullopt;
}

Stage1Result stage1(const SearchConfig& config, std::span<const RdcRecord> data,
                    const FilterInputs& filters, const VectorTypeParams& params,
                    const PeptideGeometryParams& geometry) {
  config.validate();
  params.validate();
  geometry.validate();
  filters.table.validate();
  filters.karplus.validate();

  StopWatch watch;
  Stage1Result result;
  if (!config.resolution_divides_circle())
    result.warnings.push_back("resolution " + format_g9(config.resolution) +
                              " does not divide 360; the grid is asymmetric around 180");

  const std::vector<DihedralPair> grid = generate_dihedral_grid(config.resolution);
  for (int pair_index = 1; pair_index < config.n_residues; ++pair_index) {
    // The pair's phi belongs to the second residue of the pair.
    const ResidueClass cls = config.class_of(pair_index + 1);
    std::vector<DihedralPair> kept =
        filter_grid(grid, cls, filters.table, filters.coupling_for(pair_index + 1),
                    filters.karplus);
    if (kept.empty()) {
      kept.assign(grid.begin(), grid.end());
      result.warnings.push_back("pair " + std::to_string(pair_index) +
                                ": filters removed every grid point; keeping the "
                                "unfiltered grid");
    }

    // Records scorable on the isolated 2-residue fragment. The amide
    // proton of the pair's first residue is anchored to the previous
    // peptide plane, which the fragment does not contain, so its NH
    // record is excluded (except at the chain start, where the full
    // build uses the same virtual anchor).
    std::vector<RdcRecord> usable;
    usable.reserve(data.size());
    for (const RdcRecord& rec : data) {
      if (pair_index >= 2 && rec.vector_type == VectorType::NH &&
          rec.residue_index == pair_index)
        continue;
      usable.push_back(rec);
    }

    AngleCandidateList list;
    list.pair_index = pair_index;
    list.resolution = config.resolution;
    list.entries.reserve(kept.size());
    try {
      for (const DihedralPair& d : kept) {
        const DihedralPair fragment_pair[1] = {d};
        BackboneChain fragment = build_backbone(fragment_pair, 2, geometry, pair_index);
        double score = fragment_fitness(fragment, usable, params).rmsd;
        ++result.evaluations;
        ScoredPair sp;
        sp.pair.phi = quantize_angle(d.phi);
        sp.pair.psi = quantize_angle(d.psi);
        sp.score = quantize_g9(score);
        list.entries.push_back(sp);
      }
      std::sort(list.entries.begin(), list.entries.end(), scored_pair_less);
    } catch (const InsufficientRdcData& e) {
      // Not enough data to rank this pair: keep filter order, score 0.
      list.entries.clear();
      list.fitness_fallback = true;
      for (const DihedralPair& d : kept) {
        ScoredPair sp;
        sp.pair.phi = quantize_angle(d.phi);
        sp.pair.psi = quantize_angle(d.psi);
        sp.score = 0.0;
        list.entries.push_back(sp);
      }
      result.warnings.push_back("pair " + std::to_string(pair_index) +
                                ": falling back to filter order (" + e.what() + ")");
    }
    if (list.entries.size() > config.depth)
      list.entries.resize(static_cast<std::size_t>(config.depth));
    result.lists.push_back(std::move(list));
  }
  result.seconds = watch.seconds();
  return result;
}

std::string angle_list_filename(int pair_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%03d.list", pair_index);
  return buf;
}

void write_angle_list(std::ostream& out, const AngleCandidateList& list) {
  out << "# pair " << list.pair_index << " resolution " << format_g9(list.resolution) << "\n";
  for (const ScoredPair& sp : list.entries)
    out << format_g9(sp.pair.phi) << ' ' << format_g9(sp.pair.psi) << ' '
        << format_g9(sp.score) << '\n';
  if (!out) throw std::runtime_error("angle list write failed");
}

void write_angle_list_file(const std::string& path, const AngleCandidateList& list) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_angle_list(out, list);
}

AngleCandidateList parse_angle_list(std::istream& in, const std::string& name) {
  AngleCandidateList list;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string context = name + ":" + std::to_string(line_no);
    if (line[0] == '#') {
      std::istringstream fields(line);
      std::string hash, word;
      fields >> hash >> word;
      if (word == "pair") {
        std::string idx, res_word, res;
        if (!(fields >> idx >> res_word >> res) || res_word != "resolution")
          throw std::invalid_argument(context + ": bad angle-list header");
        list.pair_index = static_cast<int>(parse_long(idx, context));
        list.resolution = parse_double(res, context);
        have_header = true;
      }
      continue;
    }
    std::istringstream fields(line);
    std::string phi, psi, score;
    if (!(fields >> phi >> psi >> score))
      throw std::invalid_argument(context + ": expected 'phi psi score'");
    ScoredPair sp;
    // Direct assignment: file values are already normalized and must
    // round-trip bitwise.
    sp.pair.phi = parse_double(phi, context);
    sp.pair.psi = parse_double(psi, context);
    sp.score = parse_double(score, context);
    list.entries.push_back(sp);
  }
  if (!have_header) throw std::invalid_argument(name + ": missing '# pair <i> resolution <R>' header");
  std::set<std::pair<double, double>> seen;
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    if (i > 0 && scored_pair_less(list.entries[i], list.entries[i - 1]))
      throw std::invalid_argument(name + ": entries not sorted ascending at entry " +
                                  std::to_string(i + 1));
    if (!seen.insert({list.entries[i].pair.phi, list.entries[i].pair.psi}).second)
      throw std::invalid_argument(name + ": duplicate dihedral pair at entry " +
                                  std::to_string(i + 1));
  }
  return list;
}

AngleCandidateList parse_angle_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_angle_list(in, path);
}

void write_beam(std::ostream& out, std::span<const BeamEntry> beam) {
  for (const BeamEntry& e : beam) {
    out << format_g9(e.score);
    for (const DihedralPair& d : e.dihedrals)
      out << ' ' << format_g9(d.phi) << ' ' << format_g9(d.psi);
    out << '\n';
  }
  if (!out) throw std::runtime_error("beam write failed");
}

void write_beam_file(const std::string& path, std::span<const BeamEntry> beam) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_beam(out, beam);
}

std::vector<BeamEntry> parse_beam(std::istream& in, const std::string& name) {
  std::vector<BeamEntry> beam;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::string context = name + ":" + std::to_string(line_no);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (fields >> tok) tokens.push_back(tok);
    if (tokens.size() < 3 || tokens.size() % 2 == 0)
      throw std::invalid_argument(context + ": expected 'score phi psi [phi psi ...]'");
    BeamEntry e;
    e.score = parse_double(tokens[0], context);
    e.dihedrals.reserve((tokens.size() - 1) / 2);
    for (std::size_t i = 1; i < tokens.size(); i += 2) {
      DihedralPair d;
      d.phi = parse_double(tokens[i], context);
      d.psi = parse_double(tokens[i + 1], context);
      e.dihedrals.push_back(d);
    }
    beam.push_back(std::move(e));
  }
  return beam;
}

std::vector<BeamEntry> parse_beam_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_beam(in, path);
}

std::vector<BeamEntry> stage2_iteration(const std::vector<BeamEntry>& beam,
                                        const AngleCandidateList& candidates,
                                        std::uint64_t depth, const EvalContext& ctx,
                                        WorkerPool& pool, const EngineOptions& options,
                                        TimingLog* log, int iteration,
                                        IterationStats* stats) {
  if (depth < 1) throw std::invalid_argument("search depth must be >= 1");
  if (beam.empty()) throw std::invalid_argument("beam is empty");
  if (candidates.entries.empty()) throw std::invalid_argument("candidate list is empty");

  // Formatted: bound the incoming list by the search depth.
  StopWatch format_watch;
  AngleCandidateList trimmed;
  const AngleCandidateList* use = &candidates;
  if (candidates.entries.size() > depth) {
    trimmed.pair_index = candidates.pair_index;
    trimmed.resolution = candidates.resolution;
    trimmed.fitness_fallback = candidates.fitness_fallback;
    trimmed.entries.assign(candidates.entries.begin(),
                           candidates.entries.begin() + static_cast<std::ptrdiff_t>(depth));
    use = &trimmed;
  }
  if (log) log->record(iteration, kHeadWorker, SectionLabel::Formatted, format_watch.seconds());

  // CrossedRead: expose the beam x candidate combinations.
  StopWatch cross_watch;
  CrossView view(beam, *use);
  if (log) log->record(iteration, kHeadWorker, SectionLabel::CrossedRead, cross_watch.seconds());

  std::vector<BeamEntry> sorted =
      parallel_evaluate_and_sort(view, pool, ctx, options, log, iteration, stats);
  if (sorted.size() > depth) sorted.resize(static_cast<std::size_t>(depth));
  return sorted;
}

FoldResult fold(const SearchConfig& config, std::span<const RdcRecord> data,
                const std::vector<AngleCandidateList>& stage1_lists,
                const VectorTypeParams& params, const PeptideGeometryParams& geometry,
                WorkerPool& pool, const FoldOptions& options) {
  config.validate();
  params.validate();
  geometry.validate();
  const int n = config.n_residues;
  if (static_cast<int>(stage1_lists.size()) != n - 1)
    throw std::invalid_argument("expected " + std::to_string(n - 1) +
                                " candidate lists, got " +
                                std::to_string(stage1_lists.size()));

  StopWatch wall;
  TimingLog log;
  FoldResult result;
  RunReport& report = result.report;
  report.n_residues = n;
  report.depth = config.depth;
  report.np = pool.size();
  report.resolution = config.resolution;
  report.legacy_io = options.legacy != nullptr;
  report.local_sort = options.engine.local_sort;
  report.merge_tree = options.engine.merge_tree;
  {
    std::set<int> media;
    for (const RdcRecord& rec : data) media.insert(rec.medium_id);
    report.media_count = static_cast<int>(media.size());
  }

  EvalContext ctx;
  ctx.geometry = geometry;
  ctx.n_residues_target = n;
  if (options.legacy) {
    LegacyIoRunner* runner = options.legacy;
    ctx.score = [runner](const BackboneChain& chain, int worker) {
      return runner->evaluate(chain, worker).rmsd;
    };
  } else {
    ctx.score = [data, params](const BackboneChain& chain, int) {
      return fragment_fitness(chain, data, params).rmsd;
    };
  }

  // Seed the beam from the first pair's list.
  std::vector<BeamEntry> beam;
  {
    const AngleCandidateList& first = stage1_lists.front();
    if (first.entries.empty()) throw std::invalid_argument("first candidate list is empty");
    const std::size_t take = std::min<std::uint64_t>(config.depth, first.entries.size());
    beam.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
      beam.push_back(BeamEntry{{first.entries[i].pair}, first.entries[i].score});
  }

  for (int pair_index = 2; pair_index <= n - 1; ++pair_index) {
    const int iteration = pair_index - 1;  // iteration k extends by pair k+1
    IterationStats stats;
    try {
      beam = stage2_iteration(beam, stage1_lists[static_cast<std::size_t>(pair_index - 1)],
                              config.depth, ctx, pool, options.engine, &log, iteration,
                              &stats);
    } catch (const std::exception& e) {
      throw std::runtime_error("stage 2 iteration " + std::to_string(iteration) +
                               " (adding residue " + std::to_string(pair_index + 1) +
                               "): " + e.what());
    }
    report.stage2_evaluations += stats.combinations;
    report.iterations.push_back(iteration);
    report.stats.push_back(stats);
    if (!options.checkpoint_dir.empty()) {
      std::filesystem::path dir(options.checkpoint_dir);
      char buf[40];
      std::snprintf(buf, sizeof buf, "beam_iter_%03d.txt", iteration);
      write_beam_file((dir / buf).string(), beam);
    }
  }

  if (!log.empty()) {
    RunReport aggregated = aggregate_report(log);
    report.sections = std::move(aggregated.sections);
    report.mean_seconds = aggregated.mean_seconds;
    for (std::string& w : aggregated.warnings) report.warnings.push_back(std::move(w));
    // aggregate_report reports iterations in log order; keep ours, they match.
  }
  if (options.legacy) {
    IoTallySnapshot tally = options.legacy->tally();
    report.io_reads = tally.reads;
    report.io_writes = tally.writes;
    report.io_setup_writes = tally.setup_writes;
  }
  report.stage2_seconds = wall.seconds();
  report.total_wall_seconds = report.stage2_seconds;
  result.best = beam.front();
  result.chain = build_backbone(result.best.dihedrals, n, geometry);
  report.best_score = result.best.score;
  result.final_beam = std::move(beam);
  return result;
}

SearchSpaceEstimate total_search_space(double resolution, int n_residues) {
  if (n_residues < 2) throw std::invalid_argument("residue count must be >= 2");
  if (!(resolution > 0.0) || !(resolution <= 360.0) || !std::isfinite(resolution))
    throw std::invalid_argument("resolution must lie in (0, 360]");
  const std::size_t axis = grid_axis(resolution).size();
  const unsigned long exponent = 2UL * static_cast<unsigned long>(n_residues - 1);
  mpz_class c;
  mpz_ui_pow_ui(c.get_mpz_t(), static_cast<unsigned long>(axis), exponent);
  SearchSpaceEstimate estimate;
  estimate.digits = c.get_str();
  estimate.log10 = static_cast<double>(exponent) * std::log10(static_cast<double>(axis));
  return estimate;
}

std::uint64_t bounded_evaluations(int n_residues, std::uint64_t depth) {
  if (n_residues < 2) throw std::invalid_argument("residue count must be >= 2");
  if (depth < 1) throw std::invalid_argument("search depth must be >= 1");
  const auto pairs = static_cast<std::uint64_t>(n_residues - 1);
  std::uint64_t m2 = 0;
  if (__builtin_mul_overflow(depth, depth, &m2))
    throw std::overflow_error("(N-1)*M^2 exceeds 64 bits");
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(pairs, m2, &out))
    throw std::overflow_error("(N-1)*M^2 exceeds 64 bits");
  return out;
}

}  // namespace rdcfold
