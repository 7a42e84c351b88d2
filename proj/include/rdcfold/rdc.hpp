#pragma once

#include "rdcfold/geometry.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdcfold {

/// One measured residual dipolar coupling.
struct RdcRecord {
  int residue_index = 0;
  VectorType vector_type = VectorType::NH;
  int medium_id = 0;
  double value = 0.0;  // Hz
  double error = 1.0;  // Hz, > 0

  void validate() const;  // finite value, error > 0
};

/// Saupe order tensor as its 5 independent components
/// (Sxx, Syy, Sxy, Sxz, Syz); Szz = -(Sxx + Syy) by tracelessness.
struct OrderTensor {
  std::array<double, 5> s{};

  double szz() const { return -(s[0] + s[1]); }
  Eigen::Matrix3d matrix() const;  // symmetric, traceless by construction
};

/// Maximal dipolar coupling constant per vector type, Hz.
struct VectorTypeParams {
  std::array<double, kVectorTypeCount> dmax{21700.0, -60400.0, 2610.0, 4290.0};

  double operator()(VectorType t) const { return dmax[static_cast<int>(t)]; }
  void validate() const;  // finite, nonzero
};

/// Linearization row r(v) with r(v) . s = v^T S v for unit v:
/// (vx^2 - vz^2, vy^2 - vz^2, 2 vx vy, 2 vx vz, 2 vy vz).
/// Throws std::invalid_argument unless ||v|| = 1 within 1e-9.
std::array<double, 5> saupe_row(const Vec3& v);

/// Forward model: dmax * (saupe_row(v) . t.s).
double back_calculate(const OrderTensor& t, const Vec3& v, double dmax);

/// Raised when a medium offers fewer than the 5 records an order-tensor
/// fit needs.
class InsufficientRdcData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorFit {
  OrderTensor tensor;
  double rmsd = 0.0;  // sqrt(mean squared residual), Hz
  std::vector<double> residuals;  // back-calculated minus measured, per input
  int effective_rank = 5;
  bool rank_deficient = false;  // minimum-norm solution used
};

/// Least-squares Saupe tensor for (dmax_i * saupe_row(v_i)) . s = rdc_i,
/// solved by SVD; singular values below 1e-10 * sigma_max are treated as
/// zero (minimum-norm solution, flagged). Throws InsufficientRdcData for
/// fewer than 5 measurements.
TensorFit fit_order_tensor(std::span<const Vec3> vectors, std::span<const double> rdcs,
                           std::span<const double> dmax_list);

struct MediumResidual {
  int medium_id = 0;
  double rmsd = 0.0;  // unweighted per-medium rmsd, Hz
  int n_records = 0;
  bool rank_deficient = false;
};

/// Fragment fitness; lower is better.
struct FitnessScore {
  double rmsd = 0.0;  // error-weighted rmsd across all media, Hz
  std::vector<MediumResidual> media;
};

/// Sentinel strictly worse than any finite fitness; keeps the beam order
/// total when a score degenerates.
double worst_fitness();

/// True when the record's vector can be formed from atoms present in the
/// chain (CN additionally needs residue_index + 1).
bool record_usable(const RdcRecord& rec, const BackboneChain& chain);

/// Per medium (ascending id): gather unit vectors of usable records (in
/// input order), fit an order tensor, collect residuals. Global rmsd is
/// the 1/error^2-weighted rms over every usable record of every medium.
/// Any medium with < 5 usable records raises InsufficientRdcData.
FitnessScore fragment_fitness(const BackboneChain& chain, std::span<const RdcRecord> data,
                              const VectorTypeParams& params);

// RDC file: lines `res_index vector_type medium_id value [error]`,
// vector_type in {NH, CAHA, CN, CAC}, `#` comments.
std::vector<RdcRecord> parse_rdc_stream(std::istream& in, const std::string& name = "<stream>");
std::vector<RdcRecord> parse_rdc_file(const std::string& path);
void write_rdc_stream(std::ostream& out, std::span<const RdcRecord> records);
void write_rdc_file(const std::string& path, std::span<const RdcRecord> records);

}  // namespace rdcfold
