#include "rdcfold/rdc.hpp"

#include "rdcfold/textio.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace rdcfold {

namespace {

constexpr double kSingularValueCutoff = 1e-10;  // relative to sigma_max

}  // namespace

void RdcRecord::validate() const {
  if (!std::isfinite(value)) throw std::invalid_argument("RDC value must be finite");
  if (!(error > 0.0) || !std::isfinite(error))
    throw std::invalid_argument("RDC error must be positive");
}

Eigen::Matrix3d OrderTensor::matrix() const {
  Eigen::Matrix3d m;
  m << s[0], s[2], s[3],
       s[2], s[1], s[4],
       s[3], s[4], szz();
  return m;
}

void VectorTypeParams::validate() const {
  for (double v : dmax)
    if (v == 0.0 || !std::isfinite(v))
      throw std::invalid_argument("Dmax values must be finite and nonzero");
}

std::array<double, 5> saupe_row(const Vec3& v) {
  if (std::abs(v.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("saupe_row needs a unit vector");
  double x = v.x(), y = v.y(), z = v.z();
  return {x * x - z * z, y * y - z * z, 2.0 * x * y, 2.0 * x * z, 2.0 * y * z};
}

double back_calculate(const OrderTensor& t, const Vec3& v, double dmax) {
  std::array<double, 5> row = saupe_row(v);
  double acc = 0.0;
  for (int i = 0; i < 5; ++i) acc += row[i] * t.s[i];
  return dmax * acc;
}

double worst_fitness() { return std::numeric_limits<double>::max(); }

TensorFit fit_order_tensor(std::span<const Vec3> vectors, std::span<const double> rdcs,
                           std::span<const double> dmax_list) {
  if (vectors.size() != rdcs.size() || vectors.size() != dmax_list.size())
    throw std::invalid_argument("fit_order_tensor: input lists differ in length");
  const auto k = static_cast<Eigen::Index>(vectors.size());
  if (k < 5)
    throw InsufficientRdcData("order tensor fit needs at least 5 measurements, got " +
                              std::to_string(vectors.size()));

  Eigen::Matrix<double, Eigen::Dynamic, 5> a(k, 5);
  Eigen::VectorXd d(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    std::array<double, 5> row = saupe_row(vectors[static_cast<std::size_t>(i)]);
    for (int j = 0; j < 5; ++j) a(i, j) = dmax_list[static_cast<std::size_t>(i)] * row[j];
    d(i) = rdcs[static_cast<std::size_t>(i)];
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 5>> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  double cutoff = kSingularValueCutoff * sigma(0);

  Eigen::Matrix<double, 5, 1> inv_sigma;
  int rank = 0;
  for (int i = 0; i < 5; ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0) {
      inv_sigma(i) = 1.0 / sigma(i);
      ++rank;
    } else {
      inv_sigma(i) = 0.0;  // minimum-norm pseudo-inverse
    }
  }
  Eigen::Matrix<double, 5, 1> x =
      svd.matrixV() * inv_sigma.asDiagonal() * (svd.matrixU().transpose() * d);

  TensorFit fit;
  for (int i = 0; i < 5; ++i) fit.tensor.s[i] = x(i);
  fit.effective_rank = rank;
  fit.rank_deficient = rank < 5;
  Eigen::VectorXd r = a * x - d;
  fit.residuals.assign(r.data(), r.data() + r.size());
  fit.rmsd = std::sqrt(r.squaredNorm() / static_cast<double>(k));
  return fit;
}

bool record_usable(const RdcRecord& rec, const BackboneChain& chain) {
  if (!chain.has_residue(rec.residue_index)) return false;
  if (rec.vector_type == VectorType::CN && !chain.has_residue(rec.residue_index + 1))
    return false;
  return true;
}

FitnessScore fragment_fitness(const BackboneChain& chain, std::span<const RdcRecord> data,
                              const VectorTypeParams& params) {
  std::set<int> media;
  for (const RdcRecord& rec : data) media.insert(rec.medium_id);
  if (media.empty()) throw InsufficientRdcData("no RDC records provided");

  FitnessScore score;
  double weighted_sum = 0.0;
  double weight_total = 0.0;
  std::vector<Vec3> vectors;
  std::vector<double> values, dmax, weights;
  for (int medium : media) {
    vectors.clear();
    values.clear();
    dmax.clear();
    weights.clear();
    for (const RdcRecord& rec : data) {
      if (rec.medium_id != medium || !record_usable(rec, chain)) continue;
      vectors.push_back(internuclear_unit_vector(chain, rec.residue_index, rec.vector_type));
      values.push_back(rec.value);
      dmax.push_back(params(rec.vector_type));
      weights.push_back(1.0 / (rec.error * rec.error));
    }
    if (vectors.size() < 5)
      throw InsufficientRdcData("medium " + std::to_string(medium) + " has only " +
                                std::to_string(vectors.size()) +
                                " usable records for residues " +
                                std::to_string(chain.first_residue()) + ".." +
                                std::to_string(chain.last_residue()));
    TensorFit fit = fit_order_tensor(vectors, values, dmax);
    score.media.push_back(MediumResidual{medium, fit.rmsd, static_cast<int>(vectors.size()),
                                         fit.rank_deficient});
    for (std::size_t i = 0; i < fit.residuals.size(); ++i) {
      weighted_sum += weights[i] * fit.residuals[i] * fit.residuals[i];
      weight_total += weights[i];
    }
  }
  score.rmsd = std::sqrt(weighted_sum / weight_total);
  if (!std::isfinite(score.rmsd)) score.rmsd = worst_fitness();
  return score;
}

std::vector<RdcRecord> parse_rdc_stream(std::istream& in, const std::string& name) {
  std::vector<RdcRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string res, type, medium, value, error;
    if (!(fields >> res >> type >> medium >> value))
      throw std::invalid_argument(name + ":" + std::to_string(line_no) +
                                  ": expected 'res_index vector_type medium_id value [error]'");
    std::string context = name + ":" + std::to_string(line_no);
    RdcRecord rec;
    rec.residue_index = static_cast<int>(parse_long(res, context));
    rec.vector_type = vector_type_from_string(type);
    rec.medium_id = static_cast<int>(parse_long(medium, context));
    rec.value = parse_double(value, context);
    if (fields >> error) rec.error = parse_double(error, context);
    rec.validate();
    out.push_back(rec);
  }
  return out;
}

std::vector<RdcRecord> parse_rdc_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_rdc_stream(in, path);
}

void write_rdc_stream(std::ostream& out, std::span<const RdcRecord> records) {
  for (const RdcRecord& rec : records) {
    out << rec.residue_index << ' ' << to_string(rec.vector_type) << ' ' << rec.medium_id
        << ' ' << format_g17(rec.value) << ' ' << format_g17(rec.error) << '\n';
  }
  if (!out) throw std::runtime_error("RDC write failed");
}

void write_rdc_file(const std::string& path, std::span<const RdcRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_rdc_stream(out, records);
}

}  // namespace rdcfold
