#include "rdcfold/synth.hpp"

#include "rdcfold/search.hpp"
#include "rdcfold/textio.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rdcfold {

SynthRng::SynthRng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t SynthRng::next_u64() { return engine_(); }

double SynthRng::uniform01() {
  // 53 high bits; values in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SynthRng::uniform(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("uniform needs lo < hi");
  return lo + (hi - lo) * uniform01();
}

std::uint64_t SynthRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below(0)");
  // Reject the sliver that would bias the modulus.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= threshold) return x % n;
  }
}

double SynthRng::gaussian() {
  for (;;) {
    const double u = 2.0 * uniform01() - 1.0;
    const double v = 2.0 * uniform01() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

namespace {

DihedralPair draw_continuous_pair(SynthRng& rng, const std::vector<RamaRect>& regions) {
  double total = 0.0;
  for (const RamaRect& r : regions) total += (r.phi_max - r.phi_min) * (r.psi_max - r.psi_min);
  double pick = rng.uniform01() * total;
  const RamaRect* chosen = &regions.back();
  for (const RamaRect& r : regions) {
    const double area = (r.phi_max - r.phi_min) * (r.psi_max - r.psi_min);
    if (pick < area) {
      chosen = &r;
      break;
    }
    pick -= area;
  }
  return DihedralPair(rng.uniform(chosen->phi_min, chosen->phi_max),
                      rng.uniform(chosen->psi_min, chosen->psi_max));
}

OrderTensor draw_tensor(SynthRng& rng) {
  const double magnitude = rng.uniform(2e-4, 1e-3);
  const double szz = rng.below(2) == 0 ? magnitude : -magnitude;
  const double rho = rng.uniform(0.0, 2.0 / 3.0);
  Eigen::Vector3d diag(-szz / 2.0 + rho * szz / 2.0, -szz / 2.0 - rho * szz / 2.0, szz);

  const double qw = rng.gaussian();
  const double qx = rng.gaussian();
  const double qy = rng.gaussian();
  const double qz = rng.gaussian();
  const Eigen::Matrix3d rot = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
  const Eigen::Matrix3d full = rot * diag.asDiagonal() * rot.transpose();

  OrderTensor t;
  t.s = {full(0, 0), full(1, 1), full(0, 1), full(0, 2), full(1, 2)};
  return t;
}

}  // namespace

SyntheticTruth synthesize_dataset(int n_residues, std::optional<double> grid_resolution,
                                  int media, double sigma, std::uint64_t seed,
                                  const PeptideGeometryParams& geometry,
                                  const VectorTypeParams& params,
                                  const RamachandranTable& table) {
  if (n_residues < 2) throw std::invalid_argument("need at least 2 residues");
  if (media < 1) throw std::invalid_argument("need at least 1 medium");
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("sigma must be finite and >= 0");
  geometry.validate();
  params.validate();
  table.validate();

  SynthRng rng(seed);
  SyntheticTruth truth;
  truth.n_residues = n_residues;
  truth.media = media;
  truth.sigma = sigma;
  truth.seed = seed;
  truth.grid_resolution = grid_resolution;

  const auto& general = table.regions(ResidueClass::General);
  std::vector<DihedralPair> snapped_pool;
  if (grid_resolution) {
    const std::vector<DihedralPair> grid = generate_dihedral_grid(*grid_resolution);
    snapped_pool = filter_grid(grid, ResidueClass::General, table, std::nullopt, {});
    if (snapped_pool.empty())
      throw std::invalid_argument("no grid point passes the Ramachandran filter at resolution " +
                                  format_g9(*grid_resolution));
  }
  for (int i = 1; i < n_residues; ++i) {
    truth.dihedrals.push_back(grid_resolution
                                  ? snapped_pool[rng.below(snapped_pool.size())]
                                  : draw_continuous_pair(rng, general));
  }

  for (int m = 0; m < media; ++m) truth.tensors.push_back(draw_tensor(rng));

  truth.chain = build_backbone(truth.dihedrals, n_residues, geometry);

  const double error = sigma > 0.0 ? sigma : 1.0;
  for (int m = 1; m <= media; ++m) {
    const OrderTensor& tensor = truth.tensors[static_cast<std::size_t>(m - 1)];
    for (int r = 1; r <= n_residues; ++r) {
      for (VectorType type : {VectorType::NH, VectorType::CAHA, VectorType::CAC, VectorType::CN}) {
        if (type == VectorType::CN && r == n_residues) continue;
        const Vec3 v = internuclear_unit_vector(truth.chain, r, type);
        double value = back_calculate(tensor, v, params(type));
        if (sigma > 0.0) value += sigma * rng.gaussian();
        truth.records.push_back(RdcRecord{r, type, m, value, error});
      }
    }
  }
  return truth;
}

void write_truth(std::ostream& out, const SyntheticTruth& truth) {
  out << "# truth N=" << truth.n_residues << " media=" << truth.media
      << " sigma=" << format_g17(truth.sigma) << " seed=" << truth.seed;
  if (truth.grid_resolution) out << " resolution=" << format_g17(*truth.grid_resolution);
  out << '\n';
  for (std::size_t i = 0; i < truth.dihedrals.size(); ++i)
    out << "pair " << (i + 1) << ' ' << format_g17(truth.dihedrals[i].phi) << ' '
        << format_g17(truth.dihedrals[i].psi) << '\n';
  for (std::size_t m = 0; m < truth.tensors.size(); ++m) {
    out << "tensor " << (m + 1);
    for (double s : truth.tensors[m].s) out << ' ' << format_g17(s);
    out << '\n';
  }
  if (!out) throw std::runtime_error("truth write failed");
}

void write_truth_file(const std::string& path, const SyntheticTruth& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_truth(out, truth);
}

SyntheticTruth parse_truth(std::istream& in, const std::string& name,
                           const PeptideGeometryParams& geometry) {
  SyntheticTruth truth;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# truth ", 0) != 0)
    throw std::invalid_argument(name + ": missing '# truth' header");
  {
    std::istringstream header(line.substr(8));
    std::string token;
    while (header >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument(name + ": bad header token '" + token + "'");
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "N")
        truth.n_residues = static_cast<int>(parse_long(value, name));
      else if (key == "media")
        truth.media = static_cast<int>(parse_long(value, name));
      else if (key == "sigma")
        truth.sigma = parse_double(value, name);
      else if (key == "seed")
        truth.seed = static_cast<std::uint64_t>(parse_long(value, name));
      else if (key == "resolution")
        truth.grid_resolution = parse_double(value, name);
      else
        throw std::invalid_argument(name + ": unknown header key '" + key + "'");
    }
  }
  if (truth.n_residues < 2) throw std::invalid_argument(name + ": header lacks a valid N");

  truth.dihedrals.resize(static_cast<std::size_t>(truth.n_residues - 1));
  std::vector<bool> have_pair(truth.dihedrals.size(), false);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    if (kind == "pair") {
      std::string idx, phi, psi;
      if (!(fields >> idx >> phi >> psi))
        throw std::invalid_argument(name + ": malformed pair line '" + line + "'");
      const long i = parse_long(idx, name);
      if (i < 1 || i > truth.n_residues - 1)
        throw std::invalid_argument(name + ": pair index " + idx + " out of range");
      DihedralPair& d = truth.dihedrals[static_cast<std::size_t>(i - 1)];
      // Direct assignment: stored values must round-trip bitwise.
      d.phi = parse_double(phi, name);
      d.psi = parse_double(psi, name);
      have_pair[static_cast<std::size_t>(i - 1)] = true;
    } else if (kind == "tensor") {
      std::string idx;
      if (!(fields >> idx)) throw std::invalid_argument(name + ": malformed tensor line");
      const long m = parse_long(idx, name);
      if (m != static_cast<long>(truth.tensors.size()) + 1)
        throw std::invalid_argument(name + ": tensor lines must appear in medium order");
      OrderTensor t;
      for (double& component : t.s) {
        std::string s;
        if (!(fields >> s))
          throw std::invalid_argument(name + ": tensor line needs 5 components");
        component = parse_double(s, name);
      }
      truth.tensors.push_back(t);
    } else {
      throw std::invalid_argument(name + ": unknown line kind '" + kind + "'");
    }
  }
  for (std::size_t i = 0; i < have_pair.size(); ++i)
    if (!have_pair[i])
      throw std::invalid_argument(name + ": missing pair " + std::to_string(i + 1));
  if (truth.media == 0) truth.media = static_cast<int>(truth.tensors.size());
  truth.chain = build_backbone(truth.dihedrals, truth.n_residues, geometry);
  return truth;
}

SyntheticTruth parse_truth_file(const std::string& path, const PeptideGeometryParams& geometry) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_truth(in, path, geometry);
}

}  // namespace rdcfold
