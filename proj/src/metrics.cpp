#include "vpreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "vpreg/diffops.hpp"
#include "vpreg/register.hpp"
#include "vpreg/resample.hpp"

namespace vpreg {

double dice(const LabelVolume& a, const LabelVolume& b, std::int32_t label) {
  require_same_domain(a.domain(), b.domain(), "dice");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ia = a[i] == label, ib = b[i] == label;
    na += ia;
    nb += ib;
    both += ia && ib;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

LabelVolume warp_labels(const LabelVolume& labels, const Transform& phi) {
  require_same_domain(labels.domain(), phi.domain(), "warp_labels");
  const Domain& dom = labels.domain();
  std::vector<std::int32_t> out(dom.size());
  for (std::size_t i = 0; i < dom.size(); ++i) {
    int p[3] = {0, 0, 0};
    for (int a = 0; a < dom.dim(); ++a) {
      const double x = std::clamp(phi.coords()[a][i], 0.0, static_cast<double>(dom.extent(a) - 1));
      p[a] = static_cast<int>(std::lround(x));
    }
    out[i] = labels[dom.index(p[0], p[1], p[2])];
  }
  return LabelVolume(dom, std::move(out));
}

double mse_ratio(const ScalarField& moving, const ScalarField& fixed, const Transform& phi) {
  const double den = mse(moving, fixed, make_identity(moving.domain()));
  if (den == 0.0) return 1.0;
  return mse(moving, fixed, phi) / den;
}

double mutual_information(const ScalarField& a, const ScalarField& b, int bins) {
  require_same_domain(a.domain(), b.domain(), "mutual_information");
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "mutual information needs at least 2 bins");
  const auto [amin, amax] = std::minmax_element(a.values().begin(), a.values().end());
  const auto [bmin, bmax] = std::minmax_element(b.values().begin(), b.values().end());
  const double ra = *amax - *amin, rb = *bmax - *bmin;
  if (!(ra > 0) || !(rb > 0)) return 0.0;
  auto bin_of = [bins](double v, double lo, double range) {
    const int k = static_cast<int>((v - lo) / range * bins);
    return std::clamp(k, 0, bins - 1);
  };
  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    joint[bin_of(a[i], *amin, ra) * bins + bin_of(b[i], *bmin, rb)] += 1.0;
  }
  std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
  for (int i = 0; i < bins; ++i)
    for (int j = 0; j < bins; ++j) {
      joint[i * bins + j] /= static_cast<double>(n);
      pa[i] += joint[i * bins + j];
      pb[j] += joint[i * bins + j];
    }
  double mi = 0;
  for (int i = 0; i < bins; ++i)
    for (int j = 0; j < bins; ++j) {
      const double p = joint[i * bins + j];
      if (p > 0) mi += p * std::log(p / (pa[i] * pb[j]));
    }
  return mi;
}

double mi_increment(const ScalarField& moving, const ScalarField& fixed, const Transform& phi, int bins) {
  const double base = mutual_information(moving, fixed, bins);
  if (base == 0.0) throw Error(ErrorCode::ZeroBaselineMI, "baseline mutual information is zero");
  return (mutual_information(warp(moving, phi), fixed, bins) - base) / base;
}

JdStats jd_stats(const Transform& phi) {
  const ScalarField jd = jacobian_determinant(phi);
  const Domain& dom = phi.domain();
  JdStats st;
  st.min = std::numeric_limits<double>::infinity();
  st.max = -st.min;
  std::size_t count = 0, neg = 0;
  for (std::size_t i = 0; i < jd.size(); ++i) {
    if (dom.on_boundary(i)) continue;
    st.min = std::min(st.min, jd[i]);
    st.max = std::max(st.max, jd[i]);
    neg += jd[i] <= 0.0;
    ++count;
  }
  st.neg_fraction = static_cast<double>(neg) / static_cast<double>(count);
  return st;
}

CompositionError composition_error(const Transform& psi) {
  const Domain& dom = psi.domain();
  const ScalarField jd = jacobian_determinant(psi);
  const VectorField u = displacement(psi);
  CompositionError e;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const double dj = std::abs(jd[i] - 1.0);
    double n2 = 0;
    for (int c = 0; c < u.components(); ++c) n2 += u[c][i] * u[c][i];
    const double dn = std::sqrt(n2);
    e.max_det = std::max(e.max_det, dj);
    e.sum_det += dj;
    e.max_norm = std::max(e.max_norm, dn);
    e.sum_norm += dn;
  }
  e.sum_det_per_voxel = e.sum_det / static_cast<double>(dom.size());
  e.sum_norm_per_voxel = e.sum_norm / static_cast<double>(dom.size());
  return e;
}

InverseConsistency inverse_consistency(const Transform& phi, const Transform& phi_inv) {
  require_same_domain(phi.domain(), phi_inv.domain(), "inverse_consistency");
  return {composition_error(compose(phi_inv, phi)), composition_error(compose(phi, phi_inv))};
}

// ---------------------------------------------------------------------------

std::optional<double> MetricRecord::dice_mean() const {
  if (dice.empty()) return std::nullopt;
  double s = 0;
  for (const auto& [label, v] : dice) s += v;
  return s / static_cast<double>(dice.size());
}

std::vector<std::pair<std::string, std::optional<double>>> MetricRecord::columns() const {
  std::vector<std::pair<std::string, std::optional<double>>> cols;
  cols.emplace_back("mse_ratio", mse_ratio);
  cols.emplace_back("mi_incr_pct", mi_incr ? std::optional<double>(*mi_incr * 100.0) : std::nullopt);
  cols.emplace_back("jd_min", jd_min);
  cols.emplace_back("jd_max", jd_max);
  cols.emplace_back("jd_neg_fraction", jd_neg_fraction);
  auto add = [&](const std::string& prefix, const CompositionError* e) {
    auto v = [&](double x) { return e ? std::optional<double>(x) : std::nullopt; };
    const CompositionError z;
    const CompositionError& r = e ? *e : z;
    cols.emplace_back(prefix + "_maxdet", v(r.max_det));
    cols.emplace_back(prefix + "_sumdet", v(r.sum_det));
    cols.emplace_back(prefix + "_sumdet_per_voxel", v(r.sum_det_per_voxel));
    cols.emplace_back(prefix + "_maxnorm", v(r.max_norm));
    cols.emplace_back(prefix + "_sumnorm", v(r.sum_norm));
    cols.emplace_back(prefix + "_sumnorm_per_voxel", v(r.sum_norm_per_voxel));
  };
  add("inv", inverse ? &inverse->inv_after_fwd : nullptr);
  add("fwdinv", inverse ? &inverse->fwd_after_inv : nullptr);
  cols.emplace_back("dice_mean", dice_mean());
  return cols;
}

MetricRecord compute_metrics(const MetricInputs& in) {
  if (!in.phi) throw Error(ErrorCode::InvalidArgument, "metrics need a forward transform");
  MetricRecord rec;
  const JdStats js = jd_stats(*in.phi);
  rec.jd_min = js.min;
  rec.jd_max = js.max;
  rec.jd_neg_fraction = js.neg_fraction;
  if (in.moving && in.fixed) {
    rec.mse_ratio = mse_ratio(*in.moving, *in.fixed, *in.phi);
    if (mutual_information(*in.moving, *in.fixed, in.bins) != 0.0) {
      rec.mi_incr = mi_increment(*in.moving, *in.fixed, *in.phi, in.bins);
    }
  }
  if (in.phi_inv) rec.inverse = inverse_consistency(*in.phi, *in.phi_inv);
  if (in.labels_moving && in.labels_fixed) {
    const LabelVolume warped = warp_labels(*in.labels_moving, *in.phi);
    std::set<std::int32_t> labels;
    for (auto l : in.labels_moving->label_set()) labels.insert(l);
    for (auto l : in.labels_fixed->label_set()) labels.insert(l);
    labels.erase(0);
    for (auto l : labels) rec.dice.emplace_back(l, dice(warped, *in.labels_fixed, l));
  }
  return rec;
}

// ---------------------------------------------------------------------------

SummaryStats summarize(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyCohort, "no values to summarize");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  SummaryStats s;
  s.count = n;
  s.min = values.front();
  s.max = values.back();
  s.q25 = quantile(0.25);
  s.median = quantile(0.5);
  s.q75 = quantile(0.75);
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return s;
}

CohortSummary cohort_summary(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyCohort, "cohort is empty");
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  auto slot = [&](const std::string& name) -> std::vector<double>& {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return values[k];
    names.push_back(name);
    values.emplace_back();
    return values.back();
  };
  for (const auto& r : records) {
    for (const auto& [name, v] : r.columns()) {
      auto& bucket = slot(name);
      if (v) bucket.push_back(*v);
    }
    for (const auto& [label, v] : r.dice) slot("dice_" + std::to_string(label)).push_back(v);
  }
  CohortSummary out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (!values[k].empty()) out.metrics.emplace_back(names[k], summarize(values[k]));
  }
  return out;
}

}  // namespace vpreg
