#include "rdcfold/cli.hpp"

#include "rdcfold/instrument.hpp"
#include "rdcfold/search.hpp"
#include "rdcfold/synth.hpp"
#include "rdcfold/textio.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace rdcfold {

namespace fs = std::filesystem;

namespace {

int default_np() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

VectorTypeParams load_dmax(const std::string& path) {
  VectorTypeParams params;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string type, value;
    if (!(fields >> type >> value))
      throw std::invalid_argument(path + ": expected 'vector_type dmax' per line");
    params.dmax[static_cast<int>(vector_type_from_string(type))] = parse_double(value, path);
  }
  params.validate();
  return params;
}

int infer_residue_count(std::span<const RdcRecord> records) {
  int n = 0;
  for (const RdcRecord& rec : records)
    n = std::max(n, rec.residue_index + (rec.vector_type == VectorType::CN ? 1 : 0));
  if (n < 2) throw std::invalid_argument("cannot infer a residue count from the RDC data");
  return n;
}

int count_media(std::span<const RdcRecord> records) {
  std::set<int> media;
  for (const RdcRecord& rec : records) media.insert(rec.medium_id);
  return static_cast<int>(media.size());
}

struct SynthArgs {
  int residues = 0;
  int media = 2;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double resolution = 10.0;  // 0 = continuous angles
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  const std::optional<double> grid =
      a.resolution > 0.0 ? std::optional<double>(a.resolution) : std::nullopt;
  const SyntheticTruth truth = synthesize_dataset(a.residues, grid, a.media, a.sigma, a.seed);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  write_rdc_file((dir / "synthetic.rdc").string(), truth.records);
  write_truth_file((dir / "truth.txt").string(), truth);
  write_backbone_file((dir / "backbone.txt").string(), truth.chain);
  std::cout << "synthesized " << truth.records.size() << " couplings over " << a.media
            << " media for " << a.residues << " residues (seed " << a.seed << ", sigma "
            << format_g9(a.sigma) << ")\n"
            << "wrote " << (dir / "synthetic.rdc").string() << ", "
            << (dir / "truth.txt").string() << ", " << (dir / "backbone.txt").string() << "\n";
  return 0;
}

struct Stage1Args {
  std::string rdc;
  int residues = 0;  // 0 = infer
  std::string sequence;
  double resolution = 10.0;
  std::uint64_t depth = 1000;
  std::string rama;
  std::string coupling;
  std::string dmax;
  std::string out;
};

int cmd_stage1(const Stage1Args& a) {
  const std::vector<RdcRecord> records = parse_rdc_file(a.rdc);
  SearchConfig cfg;
  cfg.resolution = a.resolution;
  cfg.depth = a.depth;
  cfg.n_residues = a.residues > 0 ? a.residues : infer_residue_count(records);
  cfg.sequence = a.sequence;

  FilterInputs filters;
  if (!a.rama.empty()) filters.table = parse_rama_file(a.rama);
  if (!a.coupling.empty()) filters.couplings = parse_coupling_file(a.coupling);
  const VectorTypeParams params = a.dmax.empty() ? VectorTypeParams{} : load_dmax(a.dmax);

  const Stage1Result result = stage1(cfg, records, filters, params, {});
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  for (const AngleCandidateList& list : result.lists)
    write_angle_list_file((dir / angle_list_filename(list.pair_index)).string(), list);

  std::cout << "stage 1: " << cfg.n_residues << " residues, resolution "
            << format_g9(cfg.resolution) << ", depth " << cfg.depth << "\n";
  for (const AngleCandidateList& list : result.lists)
    std::cout << "  pair " << list.pair_index << ": " << list.entries.size() << " candidates"
              << (list.fitness_fallback ? " (filter order; no tensor fit)" : "") << "\n";
  std::cout << result.evaluations << " evaluations in " << format_g9(result.seconds)
            << " s; lists written to " << dir.string() << "\n";
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

struct Stage2Args {
  std::string lists;
  std::string rdc;
  int residues = 0;  // 0 = infer from the list count
  std::uint64_t depth = 1000;
  int np = default_np();
  std::string dmax;
  std::string out;
  bool legacy_io = false;
  bool checkpoint = false;
  bool serial_sort = false;
  bool parallel_merge = false;
};

std::vector<AngleCandidateList> load_lists(const std::string& dir) {
  std::vector<AngleCandidateList> lists;
  for (int i = 1;; ++i) {
    const fs::path path = fs::path(dir) / angle_list_filename(i);
    if (!fs::exists(path)) break;
    lists.push_back(parse_angle_list_file(path.string()));
  }
  if (lists.empty())
    throw std::invalid_argument("no candidate list files (pair_001.list, ...) in '" + dir + "'");
  return lists;
}

int run_fold(const SearchConfig& cfg, std::span<const RdcRecord> records,
             const std::vector<AngleCandidateList>& lists, const VectorTypeParams& params,
             const Stage2Args& a, const Stage1Result* stage1_result) {
  fs::create_directories(a.out);
  const fs::path dir(a.out);

  WorkerPool pool(a.np);
  FoldOptions options;
  options.engine.local_sort = !a.serial_sort;
  options.engine.merge_tree = a.parallel_merge;
  if (a.checkpoint) options.checkpoint_dir = dir.string();
  std::unique_ptr<LegacyIoRunner> legacy;
  if (a.legacy_io) {
    legacy = std::make_unique<LegacyIoRunner>((dir / "legacy_scratch").string(), records,
                                              params, PeptideGeometryParams{});
    options.legacy = legacy.get();
  }

  FoldResult result = fold(cfg, records, lists, params, {}, pool, options);
  if (stage1_result != nullptr) {
    result.report.stage1_evaluations = stage1_result->evaluations;
    result.report.stage1_seconds = stage1_result->seconds;
    result.report.total_wall_seconds += stage1_result->seconds;
    result.report.warnings.insert(result.report.warnings.begin(),
                                  stage1_result->warnings.begin(),
                                  stage1_result->warnings.end());
  }

  write_beam_file((dir / "beam_final.txt").string(), result.final_beam);
  write_backbone_file((dir / "backbone.txt").string(), result.chain);
  write_report_json_file((dir / "report.json").string(), result.report);
  {
    std::ofstream csv(dir / "report.csv");
    if (!csv) throw std::runtime_error("cannot open report.csv for writing");
    write_report_csv(csv, result.report);
  }
  write_report_table(std::cout, result.report);
  std::cout << "wrote " << (dir / "beam_final.txt").string() << ", "
            << (dir / "backbone.txt").string() << ", " << (dir / "report.json").string()
            << ", " << (dir / "report.csv").string() << "\n";
  return 0;
}

int cmd_stage2(const Stage2Args& a) {
  const std::vector<RdcRecord> records = parse_rdc_file(a.rdc);
  const std::vector<AngleCandidateList> lists = load_lists(a.lists);
  if (a.residues > 0 && a.residues != static_cast<int>(lists.size()) + 1)
    throw std::invalid_argument("--residues disagrees with the number of candidate lists");
  SearchConfig cfg;
  cfg.resolution = lists.front().resolution;
  cfg.depth = a.depth;
  cfg.n_residues = static_cast<int>(lists.size()) + 1;
  const VectorTypeParams params = a.dmax.empty() ? VectorTypeParams{} : load_dmax(a.dmax);
  return run_fold(cfg, records, lists, params, a, nullptr);
}

struct FoldArgs {
  Stage1Args s1;
  Stage2Args s2;
};

int cmd_fold(const FoldArgs& a) {
  const std::vector<RdcRecord> records = parse_rdc_file(a.s1.rdc);
  SearchConfig cfg;
  cfg.resolution = a.s1.resolution;
  cfg.depth = a.s1.depth;
  cfg.n_residues = a.s1.residues > 0 ? a.s1.residues : infer_residue_count(records);
  cfg.sequence = a.s1.sequence;

  FilterInputs filters;
  if (!a.s1.rama.empty()) filters.table = parse_rama_file(a.s1.rama);
  if (!a.s1.coupling.empty()) filters.couplings = parse_coupling_file(a.s1.coupling);
  const VectorTypeParams params = a.s1.dmax.empty() ? VectorTypeParams{} : load_dmax(a.s1.dmax);

  const Stage1Result s1 = stage1(cfg, records, filters, params, {});
  fs::create_directories(a.s2.out);
  for (const AngleCandidateList& list : s1.lists)
    write_angle_list_file((fs::path(a.s2.out) / angle_list_filename(list.pair_index)).string(),
                          list);
  return run_fold(cfg, records, s1.lists, params, a.s2, &s1);
}

struct AnalyzeArgs {
  double resolution = 10.0;
  int residues = 0;
  std::uint64_t depth = 0;  // 0 = skip the beam bound
};

int cmd_analyze(const AnalyzeArgs& a) {
  const SearchSpaceEstimate space = total_search_space(a.resolution, a.residues);
  std::cout << "full search space at resolution " << format_g9(a.resolution) << " for "
            << a.residues << " residues:\n  " << space.digits << "\n  ("
            << space.digits.size() << " digits, log10 = " << format_g9(space.log10) << ")\n";
  if (a.depth > 0)
    std::cout << "beam-bounded evaluations at depth " << a.depth << ": "
              << bounded_evaluations(a.residues, a.depth) << "\n";
  return 0;
}

struct BenchArgs {
  std::string rdc;
  int residues = 0;
  double resolution = 10.0;
  std::uint64_t depth = 1000;
  std::vector<int> np_values{1, 2, 4};
  std::string out;
  bool serial_sort = false;
  bool parallel_merge = false;
};

int cmd_bench(const BenchArgs& a) {
  const std::vector<RdcRecord> records = parse_rdc_file(a.rdc);
  SearchConfig cfg;
  cfg.resolution = a.resolution;
  cfg.depth = a.depth;
  cfg.n_residues = a.residues > 0 ? a.residues : infer_residue_count(records);

  const Stage1Result s1 = stage1(cfg, records, {}, {}, {});
  fs::create_directories(a.out);
  const fs::path dir(a.out);

  std::vector<std::pair<int, double>> samples;
  for (int np : a.np_values) {
    WorkerPool pool(np);
    FoldOptions options;
    options.engine.local_sort = !a.serial_sort;
    options.engine.merge_tree = a.parallel_merge;
    const FoldResult result = fold(cfg, records, s1.lists, {}, {}, pool, options);
    samples.emplace_back(np, result.report.stage2_seconds);
    write_report_json_file((dir / ("report_np" + std::to_string(np) + ".json")).string(),
                           result.report);
    std::cout << "np=" << np << ": " << format_g9(result.report.stage2_seconds)
              << " s (best score " << format_g9(result.best.score) << ")\n";
  }

  std::set<int> distinct(a.np_values.begin(), a.np_values.end());
  if (distinct.size() >= 2) {
    const SpeedupModel model = fit_speedup_model(samples);
    std::cout << "model t = sr/np + op: sr = " << format_g9(model.sr)
              << " s, op = " << format_g9(model.op) << " s, rms residual = "
              << format_g9(model.residual) << " s\n";
    const double t1 = model.sr + model.op;
    for (int np : distinct)
      std::cout << "  predicted speedup at np=" << np << ": "
                << format_g9(t1 / (model.sr / np + model.op)) << "\n";
  }
  std::cout << "reports written to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Sequential protein backbone folding driven by residual dipolar couplings"};
  app.require_subcommand(1);
  app.set_config("--config");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic RDC dataset");
  synth->add_option("--residues", synth_args.residues, "Residue count, >= 2")->required();
  synth->add_option("--media", synth_args.media, "Alignment media count")
      ->capture_default_str();
  synth->add_option("--sigma", synth_args.sigma, "Gaussian noise in Hz")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.seed, "RNG seed")->capture_default_str();
  synth->add_option("--resolution", synth_args.resolution,
                    "Snap dihedrals to this grid; 0 = continuous")
      ->capture_default_str();
  synth->add_option("--out", synth_args.out, "Output directory")->required();

  Stage1Args s1_args;
  CLI::App* s1 = app.add_subcommand("stage1", "Score per-pair candidate angle lists");
  s1->add_option("--rdc", s1_args.rdc, "RDC data file")->required();
  s1->add_option("--residues", s1_args.residues, "Residue count; 0 = infer from data")
      ->capture_default_str();
  s1->add_option("--sequence", s1_args.sequence, "One-letter residue codes");
  s1->add_option("--resolution", s1_args.resolution, "Grid resolution in degrees")
      ->capture_default_str();
  s1->add_option("--depth", s1_args.depth, "Candidates kept per pair")->capture_default_str();
  s1->add_option("--rama", s1_args.rama, "Ramachandran region file");
  s1->add_option("--coupling", s1_args.coupling, "Scalar coupling file");
  s1->add_option("--dmax", s1_args.dmax, "Per-vector-type Dmax override file");
  s1->add_option("--out", s1_args.out, "Output directory for list files")->required();

  Stage2Args s2_args;
  CLI::App* s2 = app.add_subcommand("stage2", "Grow the beam from candidate lists");
  s2->add_option("--lists", s2_args.lists, "Directory of stage 1 list files")->required();
  s2->add_option("--rdc", s2_args.rdc, "RDC data file")->required();
  s2->add_option("--residues", s2_args.residues, "Residue count; 0 = infer from the lists")
      ->capture_default_str();
  s2->add_option("--depth", s2_args.depth, "Beam width")->capture_default_str();
  s2->add_option("--np", s2_args.np, "Worker count")->capture_default_str();
  s2->add_option("--dmax", s2_args.dmax, "Per-vector-type Dmax override file");
  s2->add_option("--out", s2_args.out, "Output directory")->required();
  s2->add_flag("--legacy-io", s2_args.legacy_io,
               "Route every evaluation through the file-based pipeline");
  s2->add_flag("--checkpoint-beams", s2_args.checkpoint, "Write the beam after each iteration");
  s2->add_flag("--serial-sort", s2_args.serial_sort,
               "One full sort at the head instead of local sorts + merge");
  s2->add_flag("--parallel-merge", s2_args.parallel_merge,
               "Merge gathered lists pairwise instead of folding");

  FoldArgs fold_args;
  CLI::App* fo = app.add_subcommand("fold", "Run both stages in one process");
  fo->add_option("--rdc", fold_args.s1.rdc, "RDC data file")->required();
  fo->add_option("--residues", fold_args.s1.residues, "Residue count; 0 = infer from data")
      ->capture_default_str();
  fo->add_option("--sequence", fold_args.s1.sequence, "One-letter residue codes");
  fo->add_option("--resolution", fold_args.s1.resolution, "Grid resolution in degrees")
      ->capture_default_str();
  fo->add_option("--depth", fold_args.s1.depth, "Beam width / candidates per pair")
      ->capture_default_str();
  fo->add_option("--rama", fold_args.s1.rama, "Ramachandran region file");
  fo->add_option("--coupling", fold_args.s1.coupling, "Scalar coupling file");
  fo->add_option("--dmax", fold_args.s1.dmax, "Per-vector-type Dmax override file");
  fo->add_option("--np", fold_args.s2.np, "Worker count")->capture_default_str();
  fo->add_option("--out", fold_args.s2.out, "Output directory")->required();
  fo->add_flag("--legacy-io", fold_args.s2.legacy_io,
               "Route every evaluation through the file-based pipeline");
  fo->add_flag("--checkpoint-beams", fold_args.s2.checkpoint,
               "Write the beam after each iteration");
  fo->add_flag("--serial-sort", fold_args.s2.serial_sort,
               "One full sort at the head instead of local sorts + merge");
  fo->add_flag("--parallel-merge", fold_args.s2.parallel_merge,
               "Merge gathered lists pairwise instead of folding");

  AnalyzeArgs an_args;
  CLI::App* an = app.add_subcommand("analyze", "Search-space size and evaluation bounds");
  an->add_option("--resolution", an_args.resolution, "Grid resolution in degrees")
      ->capture_default_str();
  an->add_option("--residues", an_args.residues, "Residue count")->required();
  an->add_option("--depth", an_args.depth, "Beam width; 0 = skip the bound")
      ->capture_default_str();

  BenchArgs bench_args;
  CLI::App* be = app.add_subcommand("bench", "Fold at several worker counts and fit a model");
  be->add_option("--rdc", bench_args.rdc, "RDC data file")->required();
  be->add_option("--residues", bench_args.residues, "Residue count; 0 = infer from data")
      ->capture_default_str();
  be->add_option("--resolution", bench_args.resolution, "Grid resolution in degrees")
      ->capture_default_str();
  be->add_option("--depth", bench_args.depth, "Beam width")->capture_default_str();
  be->add_option("--np", bench_args.np_values, "Worker counts to benchmark")
      ->delimiter(',')
      ->capture_default_str();
  be->add_option("--out", bench_args.out, "Output directory")->required();
  be->add_flag("--serial-sort", bench_args.serial_sort,
               "One full sort at the head instead of local sorts + merge");
  be->add_flag("--parallel-merge", bench_args.parallel_merge,
               "Merge gathered lists pairwise instead of folding");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(synth)) return cmd_synth(synth_args);
    if (app.got_subcommand(s1)) return cmd_stage1(s1_args);
    if (app.got_subcommand(s2)) return cmd_stage2(s2_args);
    if (app.got_subcommand(fo)) return cmd_fold(fold_args);
    if (app.got_subcommand(an)) return cmd_analyze(an_args);
    if (app.got_subcommand(be)) return cmd_bench(bench_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace rdcfold
