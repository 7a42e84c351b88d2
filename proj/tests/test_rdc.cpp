#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rdcfold/rdc.hpp"
#include "rdcfold/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace rdcfold;

namespace {

Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> g;
  Vec3 v(g(rng), g(rng), g(rng));
  while (v.norm() < 1e-6) v = Vec3(g(rng), g(rng), g(rng));
  return v.normalized();
}

OrderTensor random_tensor(std::mt19937& rng) {
  std::uniform_real_distribution<double> mag(2e-4, 1e-3);
  OrderTensor t;
  const double szz = mag(rng) * (rng() % 2 ? 1.0 : -1.0);
  const double rho = std::uniform_real_distribution<double>(0.0, 2.0 / 3.0)(rng);
  Eigen::Vector3d diag(-szz / 2 + rho * szz / 2, -szz / 2 - rho * szz / 2, szz);
  std::normal_distribution<double> g;
  const Eigen::Matrix3d rot =
      Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng)).normalized().toRotationMatrix();
  const Eigen::Matrix3d full = rot * diag.asDiagonal() * rot.transpose();
  t.s = {full(0, 0), full(1, 1), full(0, 1), full(0, 2), full(1, 2)};
  return t;
}

}  // namespace

TEST_CASE("saupe rows on the coordinate axes") {
  const auto z = saupe_row(Vec3(0, 0, 1));
  CHECK(z[0] == -1.0);
  CHECK(z[1] == -1.0);
  CHECK(z[2] == 0.0);
  CHECK(z[3] == 0.0);
  CHECK(z[4] == 0.0);
  const auto x = saupe_row(Vec3(1, 0, 0));
  CHECK(x[0] == 1.0);
  CHECK(x[1] == 0.0);
  const auto y = saupe_row(Vec3(0, 1, 0));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 1.0);
  CHECK_THROWS_AS(saupe_row(Vec3(1, 1, 0)), std::invalid_argument);
}

TEST_CASE("saupe row contraction equals the quadratic form") {
  std::mt19937 rng(2);
  for (int i = 0; i < 200; ++i) {
    const OrderTensor t = random_tensor(rng);
    const Vec3 v = random_unit(rng);
    const auto row = saupe_row(v);
    double dot = 0.0;
    for (int k = 0; k < 5; ++k) dot += row[k] * t.s[k];
    const double quad = v.dot(t.matrix() * v);
    CHECK(dot == doctest::Approx(quad).epsilon(1e-12));
  }
}

TEST_CASE("order tensor matrix is symmetric and traceless") {
  std::mt19937 rng(3);
  const OrderTensor t = random_tensor(rng);
  const Eigen::Matrix3d m = t.matrix();
  CHECK((m - m.transpose()).norm() == 0.0);
  CHECK(m.trace() == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(m(2, 2) == t.szz());
}

TEST_CASE("back calculation on an axis") {
  OrderTensor t;
  t.s = {5e-4, 0, 0, 0, 0};
  CHECK(back_calculate(t, Vec3(1, 0, 0), 21700.0) == doctest::Approx(10.85).epsilon(1e-12));
  CHECK(back_calculate(t, Vec3(0, 1, 0), 21700.0) == doctest::Approx(0.0));
  CHECK(back_calculate(t, Vec3(0, 0, 1), 21700.0) == doctest::Approx(-10.85).epsilon(1e-12));
}

TEST_CASE("fit requires five measurements") {
  std::mt19937 rng(5);
  std::vector<Vec3> v;
  std::vector<double> d, dm;
  for (int i = 0; i < 4; ++i) {
    v.push_back(random_unit(rng));
    d.push_back(1.0);
    dm.push_back(21700.0);
  }
  CHECK_THROWS_AS(fit_order_tensor(v, d, dm), InsufficientRdcData);
}

TEST_CASE("noiseless tensors are recovered to high precision") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const OrderTensor truth = random_tensor(rng);
    std::vector<Vec3> v;
    std::vector<double> d, dm;
    for (int i = 0; i < 20; ++i) {
      v.push_back(random_unit(rng));
      dm.push_back(i % 2 ? 21700.0 : -60400.0);
      d.push_back(back_calculate(truth, v.back(), dm.back()));
    }
    const TensorFit fit = fit_order_tensor(v, d, dm);
    CHECK(!fit.rank_deficient);
    CHECK(fit.effective_rank == 5);
    double norm = 0.0, err = 0.0;
    for (int k = 0; k < 5; ++k) {
      norm += truth.s[k] * truth.s[k];
      err += (fit.tensor.s[k] - truth.s[k]) * (fit.tensor.s[k] - truth.s[k]);
    }
    CHECK(std::sqrt(err / norm) < 1e-9);
    CHECK(fit.rmsd < 1e-9);
    REQUIRE(fit.residuals.size() == 20);
  }
}

TEST_CASE("five independent measurements interpolate exactly") {
  std::mt19937 rng(13);
  const OrderTensor truth = random_tensor(rng);
  std::vector<Vec3> v;
  std::vector<double> d, dm;
  while (v.size() < 5) {
    const Vec3 u = random_unit(rng);
    v.push_back(u);
    dm.push_back(21700.0);
    d.push_back(back_calculate(truth, u, 21700.0));
  }
  const TensorFit fit = fit_order_tensor(v, d, dm);
  CHECK(fit.rmsd < 1e-9);
}

TEST_CASE("degenerate vector sets produce a flagged minimum-norm solution") {
  const Vec3 u = Vec3(0.3, -0.5, 1.2).normalized();
  std::vector<Vec3> v(6, u);
  std::vector<double> dm(6, 21700.0);
  OrderTensor t;
  t.s = {3e-4, -1e-4, 5e-5, 2e-5, -4e-5};
  std::vector<double> d(6, back_calculate(t, u, 21700.0));
  const TensorFit fit = fit_order_tensor(v, d, dm);
  CHECK(fit.rank_deficient);
  CHECK(fit.effective_rank < 5);
  for (double s : fit.tensor.s) CHECK(std::isfinite(s));
  // the degenerate directions are still interpolated
  CHECK(fit.rmsd < 1e-9);
}

TEST_CASE("fit quality is rotation invariant") {
  std::mt19937 rng(17);
  std::normal_distribution<double> noise(0.0, 0.8);
  const OrderTensor truth = random_tensor(rng);
  std::vector<Vec3> v;
  std::vector<double> d, dm;
  for (int i = 0; i < 30; ++i) {
    v.push_back(random_unit(rng));
    dm.push_back(21700.0);
    d.push_back(back_calculate(truth, v.back(), 21700.0) + noise(rng));
  }
  const Eigen::Matrix3d rot =
      Eigen::AngleAxisd(1.1, Vec3(0.2, 1.0, -0.7).normalized()).toRotationMatrix();
  std::vector<Vec3> rotated;
  for (const Vec3& u : v) rotated.push_back(rot * u);
  const TensorFit a = fit_order_tensor(v, d, dm);
  const TensorFit b = fit_order_tensor(rotated, d, dm);
  CHECK(a.rmsd == doctest::Approx(b.rmsd).epsilon(1e-9));
}

TEST_CASE("noisy fits land in the expected residual band") {
  int in_band = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937 rng(1000 + trial);
    std::normal_distribution<double> noise(0.0, 0.5);
    const OrderTensor truth = random_tensor(rng);
    std::vector<Vec3> v;
    std::vector<double> d, dm;
    for (int i = 0; i < 100; ++i) {
      v.push_back(random_unit(rng));
      dm.push_back(21700.0);
      d.push_back(back_calculate(truth, v.back(), 21700.0) + noise(rng));
    }
    const double rmsd = fit_order_tensor(v, d, dm).rmsd;
    if (rmsd >= 0.25 && rmsd <= 0.75) ++in_band;
  }
  CHECK(in_band >= 95);
}

TEST_CASE("fragment fitness combines media with error weights") {
  const SyntheticTruth truth = synthesize_dataset(6, 10.0, 2, 0.0, 99);
  const FitnessScore score = fragment_fitness(truth.chain, truth.records, {});
  CHECK(score.rmsd < 1e-9);
  REQUIRE(score.media.size() == 2);
  CHECK(score.media[0].medium_id == 1);
  CHECK(score.media[1].medium_id == 2);
  CHECK(score.media[0].n_records > 5);

  // scaling every error by the same factor leaves the weighted rmsd unchanged
  std::vector<RdcRecord> scaled = truth.records;
  for (RdcRecord& r : scaled) r.error *= 2.0;
  const FitnessScore rescored = fragment_fitness(truth.chain, scaled, {});
  CHECK(rescored.rmsd == doctest::Approx(score.rmsd).epsilon(1e-12));

  // unequal errors reweight: damaged record with tiny error dominates
  std::vector<RdcRecord> damaged = truth.records;
  damaged[0].value += 5.0;
  damaged[0].error = 0.05;
  std::vector<RdcRecord> discounted = damaged;
  discounted[0].error = 10.0;
  CHECK(fragment_fitness(truth.chain, damaged, {}).rmsd >
        fragment_fitness(truth.chain, discounted, {}).rmsd);
}

TEST_CASE("fragment fitness is stable under record shuffling") {
  const SyntheticTruth truth = synthesize_dataset(5, 10.0, 2, 0.4, 123);
  const FitnessScore a = fragment_fitness(truth.chain, truth.records, {});
  std::vector<RdcRecord> shuffled = truth.records;
  std::mt19937 rng(4);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const FitnessScore b = fragment_fitness(truth.chain, shuffled, {});
  CHECK(a.rmsd == doctest::Approx(b.rmsd).epsilon(1e-9));
}

TEST_CASE("fragment fitness needs five usable records per medium") {
  const SyntheticTruth truth = synthesize_dataset(4, 10.0, 1, 0.0, 7);
  std::vector<RdcRecord> few(truth.records.begin(), truth.records.begin() + 4);
  CHECK_THROWS_AS(fragment_fitness(truth.chain, few, {}), InsufficientRdcData);
  CHECK_THROWS_AS(fragment_fitness(truth.chain, {}, {}), InsufficientRdcData);
}

TEST_CASE("the true conformation outranks random decoys") {
  const SyntheticTruth truth = synthesize_dataset(6, std::nullopt, 2, 0.0, 31);
  const double true_score = fragment_fitness(truth.chain, truth.records, {}).rmsd;
  std::mt19937 rng(32);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<DihedralPair> decoy;
    for (int k = 0; k < 5; ++k) decoy.emplace_back(angle(rng), angle(rng));
    const BackboneChain chain = build_backbone(decoy, 6, {});
    CHECK(fragment_fitness(chain, truth.records, {}).rmsd > true_score);
  }
}

TEST_CASE("record usability tracks the chain span") {
  const SyntheticTruth truth = synthesize_dataset(6, 10.0, 1, 0.0, 55);
  const BackboneChain frag = build_backbone(
      std::vector<DihedralPair>{truth.dihedrals[2]}, 2, {}, 3);  // residues 3..4
  CHECK(record_usable(RdcRecord{3, VectorType::NH, 1, 0.0, 1.0}, frag));
  CHECK(record_usable(RdcRecord{4, VectorType::CAHA, 1, 0.0, 1.0}, frag));
  CHECK(record_usable(RdcRecord{3, VectorType::CN, 1, 0.0, 1.0}, frag));
  CHECK(!record_usable(RdcRecord{4, VectorType::CN, 1, 0.0, 1.0}, frag));
  CHECK(!record_usable(RdcRecord{2, VectorType::NH, 1, 0.0, 1.0}, frag));
  CHECK(!record_usable(RdcRecord{5, VectorType::NH, 1, 0.0, 1.0}, frag));
}

TEST_CASE("worst fitness dominates any real score") {
  const SyntheticTruth truth = synthesize_dataset(4, 10.0, 1, 2.0, 77);
  CHECK(fragment_fitness(truth.chain, truth.records, {}).rmsd < worst_fitness());
  CHECK(std::isfinite(worst_fitness()));
}

TEST_CASE("rdc files round-trip bitwise") {
  std::istringstream in(
      "# example data\n"
      "3 NH 1 12.34 0.5\n"
      "4 CAHA 2 -41.25\n"
      "\n"
      "2 CN 1 1.5e-1 0.25\n");
  const auto records = parse_rdc_stream(in);
  REQUIRE(records.size() == 3);
  CHECK(records[0].residue_index == 3);
  CHECK(records[0].vector_type == VectorType::NH);
  CHECK(records[0].medium_id == 1);
  CHECK(records[0].value == 12.34);
  CHECK(records[0].error == 0.5);
  CHECK(records[1].error == 1.0);  // default
  CHECK(records[2].value == 0.15);

  const SyntheticTruth truth = synthesize_dataset(8, std::nullopt, 3, 1.3, 500);
  std::ostringstream out;
  write_rdc_stream(out, truth.records);
  std::istringstream back_in(out.str());
  const auto back = parse_rdc_stream(back_in);
  REQUIRE(back.size() == truth.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].residue_index == truth.records[i].residue_index);
    CHECK(back[i].vector_type == truth.records[i].vector_type);
    CHECK(back[i].medium_id == truth.records[i].medium_id);
    CHECK(back[i].value == truth.records[i].value);
    CHECK(back[i].error == truth.records[i].error);
  }
}

TEST_CASE("rdc parser rejects malformed input") {
  std::istringstream badtype("1 QQ 1 3.4\n");
  CHECK_THROWS_AS(parse_rdc_stream(badtype), std::invalid_argument);
  std::istringstream badvalue("1 NH 1 abc\n");
  CHECK_THROWS_AS(parse_rdc_stream(badvalue), std::invalid_argument);
  std::istringstream baderror("1 NH 1 3.4 0\n");
  CHECK_THROWS_AS(parse_rdc_stream(baderror), std::invalid_argument);
  std::istringstream short_line("1 NH 1\n");
  CHECK_THROWS_AS(parse_rdc_stream(short_line), std::invalid_argument);
}

TEST_CASE("dmax parameters validate") {
  VectorTypeParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p(VectorType::NH) == 21700.0);
  CHECK(p(VectorType::CAHA) == -60400.0);
  CHECK(p(VectorType::CN) == 2610.0);
  CHECK(p(VectorType::CAC) == 4290.0);
  p.dmax[0] = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
