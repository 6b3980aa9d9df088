#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vpreg/metrics.hpp"
#include "vpreg/register.hpp"
#include "vpreg/resample.hpp"

using namespace vpreg;

namespace {

LabelVolume slab(const Domain& d, int x_lo, int x_hi) {
  std::vector<std::int32_t> l(d.size(), 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int x = d.coords(i)[0];
    if (x >= x_lo && x < x_hi) l[i] = 1;
  }
  return LabelVolume(d, std::move(l));
}

}  // namespace

TEST_CASE("dice") {
  const Domain d{8, 8, 8};
  SUBCASE("half-overlapping slabs") {
    // |A| = |B| = 2 * 64, overlap 64
    CHECK(dice(slab(d, 2, 4), slab(d, 3, 5), 1) == 0.5);
  }
  SUBCASE("identical and disjoint") {
    CHECK(dice(slab(d, 2, 4), slab(d, 2, 4), 1) == 1.0);
    CHECK(dice(slab(d, 0, 2), slab(d, 4, 6), 1) == 0.0);
    CHECK(dice(slab(d, 0, 2), slab(d, 4, 6), 7) == 1.0);
  }
  SUBCASE("random labels against brute force") {
    std::mt19937 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const Domain r = oracle::random_domain(rng);
      const LabelVolume a = oracle::random_labels(r, rng, 3), b = oracle::random_labels(r, rng, 3);
      for (int l = 0; l <= 4; ++l) CHECK(dice(a, b, l) == oracle::dice(a, b, l));
    }
  }
}

TEST_CASE("warp_labels") {
  const Domain d{8, 8};
  const LabelVolume l = slab(d, 2, 4);
  CHECK(dice(warp_labels(l, make_identity(d)), l, 1) == 1.0);
  // a one-voxel shift of the interior moves the slab left by one
  VectorField c = identity_coords(d);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!d.on_boundary(i)) c[0][i] += 1.0;
  const LabelVolume w = warp_labels(l, Transform(c));
  CHECK(w[d.index(1, 3)] == 1);
  CHECK(w[d.index(3, 3)] == 0);
  CHECK(w[d.index(3, 0)] == 1);  // boundary row stays put
}

TEST_CASE("mutual information") {
  const Domain d{16, 16};
  std::mt19937 rng(2);
  SUBCASE("self information is the marginal entropy") {
    // two equally populated levels: log 2
    ScalarField s(d);
    for (std::size_t i = 0; i < d.size(); ++i) s[i] = i % 2;
    CHECK(mutual_information(s, s, 16) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("symmetric and non-negative") {
    const ScalarField a = oracle::random_field(d, rng), b = oracle::random_field(d, rng);
    CHECK(mutual_information(a, b) == doctest::Approx(mutual_information(b, a)).epsilon(1e-14));
    CHECK(mutual_information(a, b) >= 0);
  }
  SUBCASE("independent noise shares little information") {
    const Domain big{64, 64, 64};
    const ScalarField a = oracle::random_field(big, rng), b = oracle::random_field(big, rng);
    CHECK(mutual_information(a, b, 16) < 0.05);
  }
  SUBCASE("constant image") {
    CHECK(mutual_information(ScalarField(d, 2.0), oracle::random_field(d, rng)) == 0.0);
  }
  SUBCASE("brute force") {
    for (int trial = 0; trial < 20; ++trial) {
      const Domain r = oracle::random_domain(rng);
      const ScalarField a = oracle::random_field(r, rng), b = oracle::random_field(r, rng);
      for (int bins : {2, 16, 64}) CHECK(oracle::close(mutual_information(a, b, bins), oracle::mutual_information(a, b, bins)));
    }
  }
}

TEST_CASE("mse_ratio and mi_increment") {
  const Domain d{16, 16};
  std::mt19937 rng(4);
  const ScalarField m = oracle::random_field(d, rng), f = oracle::random_field(d, rng);
  CHECK(mse_ratio(m, f, make_identity(d)) == 1.0);
  CHECK(mse_ratio(m, m, make_identity(d)) == 1.0);
  const Transform phi = oracle::random_map(d, rng, 0.7);
  CHECK(oracle::close(mse_ratio(m, f, phi), oracle::mse(m, f, phi) / oracle::mse(m, f, make_identity(d))));
  CHECK(mi_increment(m, f, make_identity(d)) == 0.0);
  CHECK_THROWS_WITH_AS(mi_increment(ScalarField(d, 1.0), f, phi), doctest::Contains("ZeroBaselineMI"), Error);
}

TEST_CASE("summaries") {
  const SummaryStats s = summarize({4, 1, 3, 2});
  CHECK(s.min == 1);
  CHECK(s.q25 == 1.75);
  CHECK(s.median == 2.5);
  CHECK(s.q75 == 3.25);
  CHECK(s.max == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(s.count == 4);
  CHECK(summarize({7}).std == 0);
  CHECK(summarize({7}).q75 == 7);
  CHECK_THROWS_WITH_AS(summarize({}), doctest::Contains("EmptyCohort"), Error);

  std::mt19937 rng(5);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(len(rng));
    for (double& x : v) x = std::normal_distribution<double>(0, 3)(rng);
    const SummaryStats st = summarize(v);
    CHECK(oracle::close(st.q25, oracle::quantile(v, 0.25)));
    CHECK(oracle::close(st.median, oracle::quantile(v, 0.5)));
    CHECK(oracle::close(st.q75, oracle::quantile(v, 0.75)));
  }
}

TEST_CASE("jacobian statistics") {
  const Domain d{12, 12, 12};
  const JdStats id = jd_stats(make_identity(d));
  CHECK(id.min == 1.0);
  CHECK(id.max == 1.0);
  CHECK(id.neg_fraction == 0.0);

  std::mt19937 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Domain r = oracle::random_domain(rng);
    const Transform phi = oracle::random_map(r, rng, 0.8);
    const ScalarField a = jacobian_determinant(phi), b = oracle::jacobian_determinant(phi);
    double lo = 1e300;
    std::size_t neg = 0, interior = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(oracle::close(a[i], b[i]));
      if (r.on_boundary(i)) continue;
      lo = std::min(lo, b[i]);
      neg += b[i] <= 0;
      ++interior;
    }
    const JdStats st = jd_stats(phi);
    CHECK(st.min == doctest::Approx(lo).epsilon(1e-12));
    CHECK(st.neg_fraction == double(neg) / double(interior));
  }
}

TEST_CASE("composition error and inverse consistency") {
  const Domain d{16, 16};
  const CompositionError zero = composition_error(make_identity(d));
  CHECK(zero.max_det == 0);
  CHECK(zero.sum_norm == 0);

  // constant interior shift of 0.5 voxel
  VectorField c = identity_coords(d);
  std::size_t interior = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!d.on_boundary(i)) c[1][i] += 0.5, ++interior;
  const CompositionError e = composition_error(Transform(c));
  CHECK(e.max_norm == 0.5);
  CHECK(e.sum_norm == doctest::Approx(0.5 * double(interior)));
  CHECK(e.sum_norm_per_voxel == doctest::Approx(0.5 * double(interior) / double(d.size())));

  const InverseConsistency ic = inverse_consistency(make_identity(d), make_identity(d));
  CHECK(ic.inv_after_fwd.sum_det == 0);
  CHECK(ic.fwd_after_inv.max_norm == 0);
}

TEST_CASE("compute_metrics") {
  const Domain d{16, 16};
  std::mt19937 rng(8);
  const ScalarField m = oracle::random_field(d, rng), f = oracle::random_field(d, rng);
  const Transform phi = oracle::random_map(d, rng, 0.4);
  const LabelVolume lm = oracle::random_labels(d, rng, 2), lf = oracle::random_labels(d, rng, 3);
  MetricInputs in;
  in.phi = &phi;
  SUBCASE("transform only") {
    const MetricRecord r = compute_metrics(in);
    CHECK(!r.mse_ratio);
    CHECK(!r.mi_incr);
    CHECK(!r.inverse);
    CHECK(!r.dice_mean());
  }
  SUBCASE("everything") {
    in.moving = &m;
    in.fixed = &f;
    in.phi_inv = &phi;
    in.labels_moving = &lm;
    in.labels_fixed = &lf;
    const MetricRecord r = compute_metrics(in);
    CHECK(r.mse_ratio);
    CHECK(r.mi_incr);
    CHECK(r.inverse);
    REQUIRE(r.dice.size() == 3);
    const LabelVolume w = warp_labels(lm, phi);
    for (const auto& [l, v] : r.dice) CHECK(v == oracle::dice(w, lf, l));
    const auto cols = r.columns();
    CHECK(cols.front().first == "mse_ratio");
    CHECK(cols.back().first == "dice_mean");
    CHECK(cols.size() == 18);
  }
  SUBCASE("missing transform") {
    in.phi = nullptr;
    CHECK_THROWS_AS(compute_metrics(in), Error);
  }
}

TEST_CASE("cohort summary") {
  CHECK_THROWS_WITH_AS(cohort_summary({}), doctest::Contains("EmptyCohort"), Error);
  MetricRecord a, b;
  a.mse_ratio = 0.2;
  b.mse_ratio = 0.4;
  a.dice = {{1, 0.9}};
  const CohortSummary s = cohort_summary({a, b});
  bool saw_mse = false, saw_dice = false;
  for (const auto& [name, st] : s.metrics) {
    if (name == "mse_ratio") {
      saw_mse = true;
      CHECK(st.mean == doctest::Approx(0.3));
      CHECK(st.count == 2);
    }
    if (name == "dice_1") {
      saw_dice = true;
      CHECK(st.count == 1);
    }
    CHECK(name != "mi_incr_pct");
  }
  CHECK(saw_mse);
  CHECK(saw_dice);
}
