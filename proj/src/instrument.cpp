#include "rdcfold/instrument.hpp"

#include "rdcfold/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace rdcfold {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SectionLabel label) {
  switch (label) {
    case SectionLabel::Formatted: return "Formatted";
    case SectionLabel::CrossedRead: return "CrossedRead";
    case SectionLabel::Scattered: return "Scattered";
    case SectionLabel::Calculated: return "Calculated";
    case SectionLabel::Gathered: return "Gathered";
    case SectionLabel::Sorted: return "Sorted";
  }
  throw std::invalid_argument("bad section label value");
}

namespace {

SectionLabel section_from_string(const std::string& name) {
  for (int i = 0; i < kSectionCount; ++i) {
    auto label = static_cast<SectionLabel>(i);
    if (name == to_string(label)) return label;
  }
  throw std::invalid_argument("unknown section label '" + name + "'");
}

}  // namespace

void TimingLog::record(int iteration, int worker, SectionLabel label, double seconds) {
  if (seconds < 0.0) seconds = 0.0;
  std::lock_guard lk(mu_);
  entries_.push_back(SectionTiming{iteration, worker, label, seconds});
}

void TimingLog::record_section(int iteration, int worker, SectionLabel label, SteadyTime start,
                               SteadyTime end) {
  record(iteration, worker, label, std::chrono::duration<double>(end - start).count());
}

std::vector<SectionTiming> TimingLog::snapshot() const {
  std::lock_guard lk(mu_);
  return entries_;
}

bool TimingLog::empty() const {
  std::lock_guard lk(mu_);
  return entries_.empty();
}

RunReport aggregate_report(const TimingLog& log) {
  RunReport report;
  std::map<int, std::array<double, kSectionCount>> max_per_iter;
  std::map<int, std::array<bool, kSectionCount>> seen;
  for (const SectionTiming& t : log.snapshot()) {
    auto& values = max_per_iter.try_emplace(t.iteration).first->second;
    auto& flags = seen.try_emplace(t.iteration).first->second;
    const int l = static_cast<int>(t.label);
    values[l] = flags[l] ? std::max(values[l], t.seconds) : t.seconds;
    flags[l] = true;
  }
  for (const auto& [iteration, values] : max_per_iter) {
    report.iterations.push_back(iteration);
    const auto& flags = seen[iteration];
    for (int l = 0; l < kSectionCount; ++l) {
      report.sections[static_cast<std::size_t>(l)].push_back(values[static_cast<std::size_t>(l)]);
      if (!flags[static_cast<std::size_t>(l)])
        report.warnings.push_back("iteration " + std::to_string(iteration) + ": no '" +
                                  std::string(to_string(static_cast<SectionLabel>(l))) +
                                  "' sample; counted as 0");
    }
  }
  for (int l = 0; l < kSectionCount; ++l) {
    const auto& series = report.sections[static_cast<std::size_t>(l)];
    double sum = 0.0;
    for (double v : series) sum += v;
    report.mean_seconds[static_cast<std::size_t>(l)] =
        series.empty() ? 0.0 : sum / static_cast<double>(series.size());
  }
  return report;
}

namespace {

json stats_to_json(const IterationStats& s) {
  return json{{"m1", s.m1},
              {"m2", s.m2},
              {"combinations", s.combinations},
              {"scatter_bytes", s.scatter_bytes},
              {"gather_bytes", s.gather_bytes},
              {"messages", s.messages}};
}

IterationStats stats_from_json(const json& j) {
  IterationStats s;
  s.m1 = j.value("m1", std::size_t{0});
  s.m2 = j.value("m2", std::size_t{0});
  s.combinations = j.value("combinations", std::size_t{0});
  s.scatter_bytes = j.value("scatter_bytes", std::uint64_t{0});
  s.gather_bytes = j.value("gather_bytes", std::uint64_t{0});
  s.messages = j.value("messages", std::uint64_t{0});
  return s;
}

}  // namespace

void write_report_json(std::ostream& out, const RunReport& report) {
  json sections = json::object();
  json means = json::object();
  for (int l = 0; l < kSectionCount; ++l) {
    const auto label = std::string(to_string(static_cast<SectionLabel>(l)));
    sections[label] = report.sections[static_cast<std::size_t>(l)];
    means[label] = report.mean_seconds[static_cast<std::size_t>(l)];
  }
  json stats = json::array();
  for (const IterationStats& s : report.stats) stats.push_back(stats_to_json(s));
  json j{{"N", report.n_residues},
         {"M", report.depth},
         {"np", report.np},
         {"R", report.resolution},
         {"media", report.media_count},
         {"flags",
          {{"legacy_io", report.legacy_io},
           {"local_sort", report.local_sort},
           {"merge_tree", report.merge_tree}}},
         {"iterations", report.iterations},
         {"sections", sections},
         {"means", means},
         {"stats", stats},
         {"evaluations",
          {{"stage1", report.stage1_evaluations}, {"stage2", report.stage2_evaluations}}},
         {"totals",
          {{"stage1_seconds", report.stage1_seconds},
           {"stage2_seconds", report.stage2_seconds},
           {"wall_seconds", report.total_wall_seconds}}},
         {"io",
          {{"reads", report.io_reads},
           {"writes", report.io_writes},
           {"setup_writes", report.io_setup_writes}}},
         {"best_score", report.best_score},
         {"warnings", report.warnings}};
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("report write failed");
}

RunReport parse_report_json(std::istream& in, const std::string& name) {
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(name + ": " + e.what());
  }
  RunReport r;
  r.n_residues = j.value("N", 0);
  r.depth = j.value("M", std::uint64_t{0});
  r.np = j.value("np", 1);
  r.resolution = j.value("R", 0.0);
  r.media_count = j.value("media", 0);
  if (j.contains("flags")) {
    r.legacy_io = j["flags"].value("legacy_io", false);
    r.local_sort = j["flags"].value("local_sort", true);
    r.merge_tree = j["flags"].value("merge_tree", false);
  }
  r.iterations = j.value("iterations", std::vector<int>{});
  if (j.contains("sections"))
    for (auto& [label, series] : j["sections"].items())
      r.sections[static_cast<std::size_t>(static_cast<int>(section_from_string(label)))] =
          series.get<std::vector<double>>();
  if (j.contains("means"))
    for (auto& [label, value] : j["means"].items())
      r.mean_seconds[static_cast<std::size_t>(static_cast<int>(section_from_string(label)))] =
          value.get<double>();
  if (j.contains("stats"))
    for (const json& s : j["stats"]) r.stats.push_back(stats_from_json(s));
  if (j.contains("evaluations")) {
    r.stage1_evaluations = j["evaluations"].value("stage1", std::uint64_t{0});
    r.stage2_evaluations = j["evaluations"].value("stage2", std::uint64_t{0});
  }
  if (j.contains("totals")) {
    r.stage1_seconds = j["totals"].value("stage1_seconds", 0.0);
    r.stage2_seconds = j["totals"].value("stage2_seconds", 0.0);
    r.total_wall_seconds = j["totals"].value("wall_seconds", 0.0);
  }
  if (j.contains("io")) {
    r.io_reads = j["io"].value("reads", std::uint64_t{0});
    r.io_writes = j["io"].value("writes", std::uint64_t{0});
    r.io_setup_writes = j["io"].value("setup_writes", std::uint64_t{0});
  }
  r.best_score = j.value("best_score", 0.0);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

void write_report_json_file(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_report_json(out, report);
}

RunReport parse_report_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_report_json(in, path);
}

void write_report_table(std::ostream& out, const RunReport& report) {
  out << "run: N=" << report.n_residues << " M=" << report.depth << " np=" << report.np
      << " R=" << format_g9(report.resolution) << " media=" << report.media_count;
  if (report.legacy_io) out << " [legacy-io]";
  if (!report.local_sort) out << " [serial-sort]";
  if (report.merge_tree) out << " [merge-tree]";
  out << "\n";
  out << "section means over " << report.iterations.size() << " iterations (seconds):\n";
  for (int l = 0; l < kSectionCount; ++l) {
    out << "  " << std::left << std::setw(12)
        << std::string(to_string(static_cast<SectionLabel>(l))) << std::right << std::fixed
        << std::setprecision(6) << report.mean_seconds[static_cast<std::size_t>(l)] << "\n";
  }
  out.unsetf(std::ios::fixed);
  out << "evaluations: stage1=" << report.stage1_evaluations
      << " stage2=" << report.stage2_evaluations << "\n";
  out << "wall seconds: stage1=" << format_g9(report.stage1_seconds)
      << " stage2=" << format_g9(report.stage2_seconds)
      << " total=" << format_g9(report.total_wall_seconds) << "\n";
  if (report.legacy_io)
    out << "file io: reads=" << report.io_reads << " writes=" << report.io_writes
        << " (+" << report.io_setup_writes << " setup writes)\n";
  out << "best score: " << format_g9(report.best_score) << "\n";
  for (const std::string& w : report.warnings) out << "warning: " << w << "\n";
  if (!out) throw std::runtime_error("report write failed");
}

void write_report_csv(std::ostream& out, const RunReport& report) {
  out << "iteration,m1,m2,combinations,scatter_bytes,gather_bytes,messages";
  for (int l = 0; l < kSectionCount; ++l)
    out << ',' << to_string(static_cast<SectionLabel>(l));
  out << '\n';
  for (std::size_t i = 0; i < report.iterations.size(); ++i) {
    const IterationStats s = i < report.stats.size() ? report.stats[i] : IterationStats{};
    out << report.iterations[i] << ',' << s.m1 << ',' << s.m2 << ',' << s.combinations << ','
        << s.scatter_bytes << ',' << s.gather_bytes << ',' << s.messages;
    for (int l = 0; l < kSectionCount; ++l) {
      const auto& series = report.sections[static_cast<std::size_t>(l)];
      out << ',' << format_g17(i < series.size() ? series[i] : 0.0);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("report write failed");
}

SpeedupModel fit_speedup_model(std::span<const std::pair<int, double>> samples) {
  std::set<int> distinct;
  for (const auto& [np, seconds] : samples) {
    if (np < 1) throw std::invalid_argument("np samples must be >= 1");
    distinct.insert(np);
  }
  if (distinct.size() < 2)
    throw std::invalid_argument("speedup fit needs at least two distinct np values");

  // Least squares on t = sr * (1/np) + op.
  double sxx = 0, sx = 0, sxy = 0, sy = 0;
  const double n = static_cast<double>(samples.size());
  for (const auto& [np, t] : samples) {
    const double x = 1.0 / static_cast<double>(np);
    sxx += x * x;
    sx += x;
    sxy += x * t;
    sy += t;
  }
  const double denom = n * sxx - sx * sx;
  SpeedupModel model;
  model.sr = (n * sxy - sx * sy) / denom;
  model.op = (sy - model.sr * sx) / n;
  if (model.op < 0.0) {
    // Refit through the origin: overhead cannot be negative.
    model.op = 0.0;
    model.sr = sxy / sxx;
  }
  double ss = 0.0;
  for (const auto& [np, t] : samples) {
    const double r = model.sr / static_cast<double>(np) + model.op - t;
    ss += r * r;
  }
  model.residual = std::sqrt(ss / n);
  return model;
}

namespace {

constexpr const char* kGeometryFile = "geometry.txt";

void count_write(std::atomic<std::uint64_t>& counter) { counter.fetch_add(1, std::memory_order_relaxed); }

std::string medium_filename(int medium) {
  return "rdc_medium_" + std::to_string(medium) + ".txt";
}

void write_geometry_file(const fs::path& path, const PeptideGeometryParams& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "len_n_ca " << format_g17(p.len_n_ca) << "\nlen_ca_c " << format_g17(p.len_ca_c)
      << "\nlen_c_n " << format_g17(p.len_c_n) << "\nlen_n_h " << format_g17(p.len_n_h)
      << "\nlen_ca_ha " << format_g17(p.len_ca_ha) << "\nlen_c_o " << format_g17(p.len_c_o)
      << "\nang_n_ca_c " << format_g17(p.ang_n_ca_c) << "\nang_ca_c_n "
      << format_g17(p.ang_ca_c_n) << "\nang_c_n_ca " << format_g17(p.ang_c_n_ca) << "\nomega "
      << format_g17(p.omega) << "\n";
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void read_geometry_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string key, value;
  int fields = 0;
  while (in >> key >> value) {
    parse_double(value, path.string());
    ++fields;
  }
  if (fields != 10)
    throw std::runtime_error("geometry file '" + path.string() + "' is malformed");
}

// Full-precision coordinate dump; parse_backbone reads it back bitwise.
void write_coords_file(const fs::path& path, const BackboneChain& chain) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  static constexpr const char* kNames[6] = {"N", "H", "CA", "HA", "C", "O"};
  for (int i = 0; i < chain.size(); ++i) {
    const int res = chain.first_residue() + i;
    const ResidueAtoms& r = chain.residues()[static_cast<std::size_t>(i)];
    const Vec3* atoms[6] = {&r.n, &r.h, &r.ca, &r.ha, &r.c, &r.o};
    for (int a = 0; a < 6; ++a)
      out << res << ' ' << kNames[a] << ' ' << format_g17(atoms[a]->x()) << ' '
          << format_g17(atoms[a]->y()) << ' ' << format_g17(atoms[a]->z()) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

struct SolverInput {
  std::vector<Vec3> vectors;
  std::vector<double> values;
  std::vector<double> dmax;
  std::vector<double> weights;
};

// One row per usable record: vx vy vz rdc dmax weight.
void write_matrix_file(const fs::path& path, const SolverInput& input) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < input.vectors.size(); ++i) {
    const Vec3& v = input.vectors[i];
    out << format_g17(v.x()) << ' ' << format_g17(v.y()) << ' ' << format_g17(v.z()) << ' '
        << format_g17(input.values[i]) << ' ' << format_g17(input.dmax[i]) << ' '
        << format_g17(input.weights[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

SolverInput read_matrix_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  SolverInput input;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string x, y, z, value, dmax, weight;
    if (!(fields >> x >> y >> z >> value >> dmax >> weight))
      throw std::runtime_error("matrix file '" + path.string() + "' is malformed");
    const std::string& c = path.string();
    input.vectors.emplace_back(parse_double(x, c), parse_double(y, c), parse_double(z, c));
    input.values.push_back(parse_double(value, c));
    input.dmax.push_back(parse_double(dmax, c));
    input.weights.push_back(parse_double(weight, c));
  }
  return input;
}

struct SolutionPayload {
  OrderTensor tensor;
  double rmsd = 0.0;
  int rank = 5;
  std::vector<double> residuals;
  std::vector<double> weights;
};

void write_solution_file(const fs::path& path, const SolutionPayload& sol) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "tensor";
  for (double s : sol.tensor.s) out << ' ' << format_g17(s);
  out << "\nrmsd " << format_g17(sol.rmsd) << "\nrank " << sol.rank << "\n";
  for (std::size_t i = 0; i < sol.residuals.size(); ++i)
    out << "residual " << format_g17(sol.residuals[i]) << ' ' << format_g17(sol.weights[i])
        << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

SolutionPayload read_solution_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  SolutionPayload sol;
  std::string key;
  const std::string c = path.string();
  bool have_tensor = false;
  while (in >> key) {
    if (key == "tensor") {
      std::string s;
      for (double& component : sol.tensor.s) {
        in >> s;
        component = parse_double(s, c);
      }
      have_tensor = true;
    } else if (key == "rmsd") {
      std::string s;
      in >> s;
      sol.rmsd = parse_double(s, c);
    } else if (key == "rank") {
      in >> sol.rank;
    } else if (key == "residual") {
      std::string r, w;
      in >> r >> w;
      sol.residuals.push_back(parse_double(r, c));
      sol.weights.push_back(parse_double(w, c));
    } else {
      throw std::runtime_error("solution file '" + c + "' has unknown field '" + key + "'");
    }
  }
  if (!have_tensor) throw std::runtime_error("solution file '" + c + "' lacks a tensor");
  return sol;
}

}  // namespace

LegacyIoRunner::LegacyIoRunner(std::string scratch_dir, std::span<const RdcRecord> data,
                               const VectorTypeParams& params,
                               const PeptideGeometryParams& geometry)
    : scratch_(std::move(scratch_dir)), data_(data.begin(), data.end()), params_(params) {
  params_.validate();
  geometry.validate();
  if (data_.empty()) throw std::invalid_argument("legacy runner needs RDC records");
  fs::create_directories(scratch_);
  std::set<int> media;
  for (const RdcRecord& rec : data_) media.insert(rec.medium_id);
  medium_ids_.assign(media.begin(), media.end());

  write_geometry_file(fs::path(scratch_) / kGeometryFile, geometry);
  ++setup_writes_;
  for (int medium : medium_ids_) {
    std::vector<RdcRecord> subset;
    for (const RdcRecord& rec : data_)
      if (rec.medium_id == medium) subset.push_back(rec);
    write_rdc_file((fs::path(scratch_) / medium_filename(medium)).string(), subset);
    ++setup_writes_;
  }
}

FitnessScore LegacyIoRunner::evaluate(const BackboneChain& chain, int worker_id) {
  const fs::path worker_dir = fs::path(scratch_) / ("w" + std::to_string(worker_id));
  fs::create_directories(worker_dir);
  const fs::path coords = worker_dir / "coords.txt";
  const fs::path matrix = worker_dir / "matrix.txt";
  const fs::path solution = worker_dir / "solution.txt";

  FitnessScore score;
  double weighted_sum = 0.0;
  double weight_total = 0.0;
  for (int medium : medium_ids_) {
    // Conformation generation stage: consult the geometry table, emit
    // the fragment coordinates.
    read_geometry_file(fs::path(scratch_) / kGeometryFile);
    reads_.fetch_add(1, std::memory_order_relaxed);
    write_coords_file(coords, chain);
    count_write(writes_);

    // Solver setup stage: load coordinates and measurements, emit the
    // solver input.
    BackboneChain parsed = parse_backbone_file(coords.string());
    reads_.fetch_add(1, std::memory_order_relaxed);
    std::vector<RdcRecord> records =
        parse_rdc_file((fs::path(scratch_) / medium_filename(medium)).string());
    reads_.fetch_add(1, std::memory_order_relaxed);
    SolverInput input;
    for (const RdcRecord& rec : records) {
      if (!record_usable(rec, parsed)) continue;
      input.vectors.push_back(
          internuclear_unit_vector(parsed, rec.residue_index, rec.vector_type));
      input.values.push_back(rec.value);
      input.dmax.push_back(params_(rec.vector_type));
      input.weights.push_back(1.0 / (rec.error * rec.error));
    }
    write_matrix_file(matrix, input);
    count_write(writes_);

    // Solve stage: load the solver input, fit, emit the solution.
    SolverInput loaded = read_matrix_file(matrix);
    reads_.fetch_add(1, std::memory_order_relaxed);
    if (loaded.vectors.size() < 5)
      throw InsufficientRdcData("medium " + std::to_string(medium) + " has only " +
                                std::to_string(loaded.vectors.size()) +
                                " usable records for residues " +
                                std::to_string(parsed.first_residue()) + ".." +
                                std::to_string(parsed.last_residue()));
    TensorFit fit = fit_order_tensor(loaded.vectors, loaded.values, loaded.dmax);
    SolutionPayload payload{fit.tensor, fit.rmsd, fit.effective_rank, fit.residuals,
                            loaded.weights};
    write_solution_file(solution, payload);
    count_write(writes_);

    // Scoring stage: load the solution, accumulate.
    SolutionPayload result = read_solution_file(solution);
    reads_.fetch_add(1, std::memory_order_relaxed);
    score.media.push_back(MediumResidual{medium, result.rmsd,
                                         static_cast<int>(result.residuals.size()),
                                         result.rank < 5});
    for (std::size_t i = 0; i < result.residuals.size(); ++i) {
      weighted_sum += result.weights[i] * result.residuals[i] * result.residuals[i];
      weight_total += result.weights[i];
    }
  }
  score.rmsd = std::sqrt(weighted_sum / weight_total);
  if (!std::isfinite(score.rmsd)) score.rmsd = worst_fitness();
  evaluations_.fetch_add(1, std::memory_order_relaxed);
  return score;
}

IoTallySnapshot LegacyIoRunner::tally() const {
  IoTallySnapshot snap;
  snap.reads = reads_.load(std::memory_order_relaxed);
  snap.writes = writes_.load(std::memory_order_relaxed);
  snap.setup_writes = setup_writes_;
  snap.evaluations = evaluations_.load(std::memory_order_relaxed);
  return snap;
}

FitnessScore legacy_io_fitness(const BackboneChain& chain, std::span<const RdcRecord> data,
                               const VectorTypeParams& params, const std::string& scratch_dir,
                               const PeptideGeometryParams& geometry) {
  LegacyIoRunner runner(scratch_dir, data, params, geometry);
  return runner.evaluate(chain, 0);
}

}  // namespace rdcfold
