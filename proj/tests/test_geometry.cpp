#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rdcfold/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

using namespace rdcfold;

namespace {

DihedralPair random_pair(std::mt19937& rng) {
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  return DihedralPair(angle(rng), angle(rng));
}

std::vector<DihedralPair> random_pairs(std::mt19937& rng, int n) {
  std::vector<DihedralPair> out;
  for (int i = 0; i < n; ++i) out.push_back(random_pair(rng));
  return out;
}

double wrap_diff(double a, double b) {
  double d = std::fmod(a - b + 540.0, 360.0) - 180.0;
  return std::abs(d);
}

}  // namespace

TEST_CASE("normalize_angle maps onto [-180, 180)") {
  CHECK(normalize_angle(0.0) == 0.0);
  CHECK(normalize_angle(-180.0) == -180.0);
  CHECK(normalize_angle(180.0) == -180.0);
  CHECK(normalize_angle(540.0) == -180.0);
  CHECK(normalize_angle(-190.0) == doctest::Approx(170.0));
  CHECK(normalize_angle(359.0) == doctest::Approx(-1.0));
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> wide(-2000.0, 2000.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = normalize_angle(wide(rng));
    CHECK(v >= -180.0);
    CHECK(v < 180.0);
  }
}

TEST_CASE("default geometry parameters validate") {
  PeptideGeometryParams p;
  CHECK_NOTHROW(p.validate());
  p.len_n_ca = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.ang_n_ca_c = 180.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.omega = 90.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("place_atom reproduces requested internal coordinates") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::uniform_real_distribution<double> len(0.5, 3.0);
  std::uniform_real_distribution<double> ang(5.0, 175.0);
  std::uniform_real_distribution<double> tor(-180.0, 180.0);
  int tested = 0;
  while (tested < 300) {
    const Vec3 a(coord(rng), coord(rng), coord(rng));
    const Vec3 b(coord(rng), coord(rng), coord(rng));
    const Vec3 c(coord(rng), coord(rng), coord(rng));
    if ((b - a).cross(c - b).norm() < 1e-3) continue;
    const double r = len(rng), theta = ang(rng), tau = tor(rng);
    const Vec3 d = place_atom(a, b, c, r, theta, tau);
    CHECK((d - c).norm() == doctest::Approx(r).epsilon(1e-10));
    const double cos_theta = (b - c).normalized().dot((d - c).normalized());
    CHECK(std::acos(cos_theta) * 180.0 / std::numbers::pi ==
          doctest::Approx(theta).epsilon(1e-9));
    CHECK(wrap_diff(dihedral_angle(a, b, c, d), tau) < 1e-8);
    ++tested;
  }
}

TEST_CASE("place_atom rejects degenerate frames") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(2, 0, 0);  // collinear
  CHECK_THROWS_AS(place_atom(a, b, c, 1.5, 109.5, 60.0), std::invalid_argument);
  CHECK_THROWS_AS(place_atom(a, b, b, 1.5, 109.5, 60.0), std::invalid_argument);
}

TEST_CASE("first residue frame matches the reference construction") {
  const BackboneChain chain = build_backbone(std::vector<DihedralPair>{{-57, -47}}, 2, {});
  const ResidueAtoms& r1 = chain.residue(1);
  CHECK(r1.n.norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r1.ca.x() == doctest::Approx(1.458).epsilon(1e-12));
  CHECK(r1.ca.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((r1.c - Vec3(2.009477469375, 1.421793796854, 0.0)).norm() < 1e-10);
  CHECK((r1.h - Vec3(-0.491968682307, 0.882080957526, 0.0)).norm() < 1e-10);
  CHECK((r1.ha - Vec3(1.821333333333, -0.530634950166, -0.880065587642)).norm() < 1e-10);
  CHECK((r1.o - Vec3(3.223238591009, 1.627086124061, 0.0)).norm() < 1e-10);
  const Vec3 nh = internuclear_unit_vector(chain, 1, VectorType::NH);
  CHECK((nh - Vec3(-0.487097705254, 0.873347482699, 0.0)).norm() < 1e-10);
  // HA sits at the tetrahedral angle from both backbone bonds
  const double to_n = std::acos((r1.n - r1.ca).normalized().dot((r1.ha - r1.ca).normalized()));
  const double to_c = std::acos((r1.c - r1.ca).normalized().dot((r1.ha - r1.ca).normalized()));
  CHECK(to_n * 180.0 / std::numbers::pi == doctest::Approx(109.471220634491).epsilon(1e-10));
  CHECK(to_c * 180.0 / std::numbers::pi == doctest::Approx(109.471220634491).epsilon(1e-10));
}

TEST_CASE("alpha helix spans the reference distances") {
  const std::vector<DihedralPair> helix2(2, DihedralPair(-57, -47));
  const BackboneChain three = build_backbone(helix2, 3, {});
  CHECK((three.residue(3).ca - three.residue(1).ca).norm() ==
        doctest::Approx(5.466076025201).epsilon(1e-10));

  const std::vector<DihedralPair> helix10(10, DihedralPair(-57, -47));
  const BackboneChain eleven = build_backbone(helix10, 11, {});
  CHECK((eleven.residue(11).ca - eleven.residue(1).ca).norm() ==
        doctest::Approx(15.886570358117).epsilon(1e-10));
}

TEST_CASE("built chains honor every bond length and angle") {
  PeptideGeometryParams p;
  std::mt19937 rng(21);
  const std::vector<DihedralPair> pairs = random_pairs(rng, 7);
  const BackboneChain chain = build_backbone(pairs, 8, p);
  for (int i = 1; i <= 8; ++i) {
    const ResidueAtoms& r = chain.residue(i);
    CHECK((r.ca - r.n).norm() == doctest::Approx(p.len_n_ca).epsilon(1e-10));
    CHECK((r.c - r.ca).norm() == doctest::Approx(p.len_ca_c).epsilon(1e-10));
    CHECK((r.h - r.n).norm() == doctest::Approx(p.len_n_h).epsilon(1e-10));
    CHECK((r.ha - r.ca).norm() == doctest::Approx(p.len_ca_ha).epsilon(1e-10));
    CHECK((r.o - r.c).norm() == doctest::Approx(p.len_c_o).epsilon(1e-10));
    const double ang =
        std::acos((r.n - r.ca).normalized().dot((r.c - r.ca).normalized())) * 180.0 /
        std::numbers::pi;
    CHECK(ang == doctest::Approx(p.ang_n_ca_c).epsilon(1e-9));
    if (i < 8) {
      const ResidueAtoms& next = chain.residue(i + 1);
      CHECK((next.n - r.c).norm() == doctest::Approx(p.len_c_n).epsilon(1e-10));
      // trans peptide plane
      CHECK(wrap_diff(dihedral_angle(r.ca, r.c, next.n, next.ca), 180.0) < 1e-8);
    }
  }
}

TEST_CASE("dihedral extraction inverts construction") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 19);
    const std::vector<DihedralPair> pairs = random_pairs(rng, n - 1);
    const BackboneChain chain = build_backbone(pairs, n, {});
    const std::vector<DihedralPair> back = extract_dihedrals(chain);
    REQUIRE(back.size() == pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      CHECK(wrap_diff(back[k].phi, pairs[k].phi) < 1e-6);
      CHECK(wrap_diff(back[k].psi, pairs[k].psi) < 1e-6);
    }
  }
}

TEST_CASE("appending preserves the prefix bitwise") {
  std::mt19937 rng(11);
  const std::vector<DihedralPair> pairs = random_pairs(rng, 9);
  const BackboneChain full = build_backbone(pairs, 10, {});

  BackboneChain grown = build_backbone({pairs.begin(), pairs.begin() + 1}, 2, {});
  for (std::size_t k = 1; k < pairs.size(); ++k) grown = append_residue(grown, pairs[k], {});

  REQUIRE(grown.size() == full.size());
  for (int i = 1; i <= full.size(); ++i) {
    const ResidueAtoms& a = full.residue(i);
    const ResidueAtoms& b = grown.residue(i);
    CHECK((a.n.array() == b.n.array()).all());
    CHECK((a.h.array() == b.h.array()).all());
    CHECK((a.ca.array() == b.ca.array()).all());
    CHECK((a.ha.array() == b.ha.array()).all());
    CHECK((a.c.array() == b.c.array()).all());
    CHECK((a.o.array() == b.o.array()).all());
  }
}

TEST_CASE("extraction is invariant under rigid motion") {
  std::mt19937 rng(13);
  const std::vector<DihedralPair> pairs = random_pairs(rng, 6);
  const BackboneChain chain = build_backbone(pairs, 7, {});
  const std::vector<DihedralPair> before = extract_dihedrals(chain);

  const Eigen::Matrix3d rot =
      Eigen::AngleAxisd(0.83, Vec3(1, 2, -0.5).normalized()).toRotationMatrix();
  const Vec3 shift(12.0, -3.5, 40.0);
  std::vector<ResidueAtoms> moved;
  for (const ResidueAtoms& r : chain.residues()) {
    ResidueAtoms m;
    m.n = rot * r.n + shift;
    m.h = rot * r.h + shift;
    m.ca = rot * r.ca + shift;
    m.ha = rot * r.ha + shift;
    m.c = rot * r.c + shift;
    m.o = rot * r.o + shift;
    moved.push_back(m);
  }
  const BackboneChain moved_chain(moved, chain.first_residue());
  const std::vector<DihedralPair> after = extract_dihedrals(moved_chain);
  for (std::size_t k = 0; k < before.size(); ++k) {
    CHECK(wrap_diff(after[k].phi, before[k].phi) < 1e-9);
    CHECK(wrap_diff(after[k].psi, before[k].psi) < 1e-9);
  }
  // internuclear vectors co-rotate
  for (int r = 1; r <= 7; ++r)
    for (int t = 0; t < kVectorTypeCount; ++t) {
      const auto type = static_cast<VectorType>(t);
      if (type == VectorType::CN && r == 7) continue;
      const Vec3 v = rot * internuclear_unit_vector(chain, r, type);
      const Vec3 w = internuclear_unit_vector(moved_chain, r, type);
      CHECK((v - w).norm() < 1e-12);
    }
}

TEST_CASE("internuclear vectors are unit length and span the right atoms") {
  std::mt19937 rng(17);
  const BackboneChain chain = build_backbone(random_pairs(rng, 4), 5, {});
  for (int r = 1; r <= 5; ++r) {
    for (int t = 0; t < kVectorTypeCount; ++t) {
      const auto type = static_cast<VectorType>(t);
      if (type == VectorType::CN && r == 5) continue;
      CHECK(internuclear_unit_vector(chain, r, type).norm() ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  const Vec3 cn = internuclear_unit_vector(chain, 2, VectorType::CN);
  const Vec3 expect = (chain.residue(3).n - chain.residue(2).c).normalized();
  CHECK((cn - expect).norm() < 1e-15);
  CHECK_THROWS_AS(internuclear_unit_vector(chain, 5, VectorType::CN), std::out_of_range);
  CHECK_THROWS_AS(internuclear_unit_vector(chain, 9, VectorType::NH), std::out_of_range);
}

TEST_CASE("fragments carry their first residue index") {
  std::mt19937 rng(19);
  const BackboneChain frag = build_backbone(random_pairs(rng, 1), 2, {}, 6);
  CHECK(frag.first_residue() == 6);
  CHECK(frag.last_residue() == 7);
  CHECK(frag.has_residue(6));
  CHECK(frag.has_residue(7));
  CHECK(!frag.has_residue(5));
  CHECK_THROWS_AS(frag.residue(1), std::out_of_range);
}

TEST_CASE("backbone files round-trip") {
  std::mt19937 rng(23);
  const BackboneChain chain = build_backbone(random_pairs(rng, 5), 6, {}, 3);
  std::ostringstream out;
  write_backbone(out, chain);
  std::istringstream in(out.str());
  const BackboneChain back = parse_backbone(in);
  REQUIRE(back.size() == chain.size());
  CHECK(back.first_residue() == 3);
  for (int i = 3; i <= 8; ++i) {
    CHECK((back.residue(i).n - chain.residue(i).n).norm() < 1e-6);
    CHECK((back.residue(i).o - chain.residue(i).o).norm() < 1e-6);
    CHECK((back.residue(i).ha - chain.residue(i).ha).norm() < 1e-6);
  }
  // second write of the parsed chain is byte-identical (stable format)
  std::ostringstream again;
  write_backbone(again, back);
  std::istringstream in2(again.str());
  const BackboneChain twice = parse_backbone(in2);
  std::ostringstream third;
  write_backbone(third, twice);
  CHECK(again.str() == third.str());
}

TEST_CASE("backbone parser rejects incomplete input") {
  std::istringstream missing("# rdc-fold backbone N=1\n1 N 0 0 0\n1 CA 1.4 0 0\n");
  CHECK_THROWS_AS(parse_backbone(missing), std::invalid_argument);
  std::istringstream gap(
      "# rdc-fold backbone N=2\n"
      "1 N 0 0 0\n1 H 0 1 0\n1 CA 1 0 0\n1 HA 1 1 0\n1 C 2 0 0\n1 O 2 1 0\n"
      "3 N 4 0 0\n3 H 4 1 0\n3 CA 5 0 0\n3 HA 5 1 0\n3 C 6 0 0\n3 O 6 1 0\n");
  CHECK_THROWS_AS(parse_backbone(gap), std::invalid_argument);
}

TEST_CASE("build_backbone validates its inputs") {
  CHECK_THROWS_AS(build_backbone(std::vector<DihedralPair>{}, 1, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_backbone(std::vector<DihedralPair>{{0, 0}}, 3, {}),
                  std::invalid_argument);
  std::vector<DihedralPair> bad{{0, 0}};
  bad[0].phi = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(build_backbone(bad, 2, {}), std::invalid_argument);
}

TEST_CASE("vector type names round-trip") {
  for (int t = 0; t < kVectorTypeCount; ++t) {
    const auto type = static_cast<VectorType>(t);
    CHECK(vector_type_from_string(std::string(to_string(type))) == type);
  }
  CHECK_THROWS_AS(vector_type_from_string("XY"), std::invalid_argument);
}
