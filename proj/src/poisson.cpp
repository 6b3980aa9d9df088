#include "vpreg/poisson.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

namespace vpreg {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(static_cast<double*>(fftw_malloc(sizeof(double) * n))), size(n) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* ptr;
  std::size_t size;
};

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n)
      : ptr(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))), size(n) {
    if (!ptr) throw std::bad_alloc();
  }
  ~ComplexBuffer() { fftw_free(ptr); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;
  fftw_complex* ptr;
  std::size_t size;
};

// FFTW wants the slowest axis first.
std::vector<int> fftw_dims(const Domain& dom, int shrink) {
  std::vector<int> dims;
  for (int a = dom.dim() - 1; a >= 0; --a) dims.push_back(dom.extent(a) - shrink);
  return dims;
}

double sin2(double x) {
  const double s = std::sin(x);
  return s * s;
}

// Periodic angular frequency for index k on n points, Nyquist dropped.
double periodic_wavenumber(int k, int n) {
  if (2 * k == n) return 0.0;
  const int kk = k <= n / 2 ? k : k - n;
  return 2.0 * std::numbers::pi * kk / n;
}

// Plan pair for periodic real transforms on a full lattice.
struct PeriodicPlans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::size_t complex_size = 0;

  explicit PeriodicPlans(const Domain& dom) {
    const auto dims = fftw_dims(dom, 0);
    complex_size = dom.size() / dom.extent(0) * (dom.extent(0) / 2 + 1);
    FftwBuffer r(dom.size());
    ComplexBuffer c(complex_size);
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_r2c(static_cast<int>(dims.size()), dims.data(), r.ptr, c.ptr, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r(static_cast<int>(dims.size()), dims.data(), c.ptr, r.ptr, FFTW_ESTIMATE);
  }
  ~PeriodicPlans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
  PeriodicPlans(const PeriodicPlans&) = delete;
  PeriodicPlans& operator=(const PeriodicPlans&) = delete;

  // Calls fn(complex index, kx, ky, kz) over the half-spectrum.
  template <class Fn>
  void for_each_mode(const Domain& dom, Fn&& fn) const {
    const int hx = dom.extent(0) / 2 + 1;
    std::size_t idx = 0;
    for (int z = 0; z < dom.extent(2); ++z)
      for (int y = 0; y < dom.extent(1); ++y)
        for (int x = 0; x < hx; ++x) fn(idx++, x, y, z);
  }
};

}  // namespace

struct PoissonSolver::Plans {
  // Dirichlet: in-place RODFT00 over the interior block.
  fftw_plan dst = nullptr;
  std::size_t interior_size = 0;
  std::unique_ptr<PeriodicPlans> periodic;
  std::vector<double> inverse_symbol;  // scaled 1 / eigenvalue, 0 on the null space

  ~Plans() {
    if (dst) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(dst);
    }
  }
};

PoissonSolver::PoissonSolver(const Domain& domain, BcMode bc)
    : domain_(domain), bc_(bc), plans_(std::make_unique<Plans>()) {
  const int d = domain.dim();
  if (bc == BcMode::DirichletZero) {
    const auto dims = fftw_dims(domain, 2);
    std::size_t m = 1;
    for (int v : dims) m *= static_cast<std::size_t>(v);
    plans_->interior_size = m;
    {
      FftwBuffer buf(m);
      std::vector<fftw_r2r_kind> kinds(dims.size(), FFTW_RODFT00);
      std::lock_guard lock(planner_mutex());
      plans_->dst = fftw_plan_r2r(static_cast<int>(dims.size()), dims.data(), buf.ptr, buf.ptr, kinds.data(),
                                  FFTW_ESTIMATE);
    }
    // RODFT00 applied twice scales each axis by 2(m+1) = 2(n-1).
    double scale = 1.0;
    for (int a = 0; a < d; ++a) scale *= 2.0 * (domain.extent(a) - 1);
    plans_->inverse_symbol.resize(m);
    const int mx = domain.extent(0) - 2, my = domain.extent(1) - 2, mz = d == 3 ? domain.extent(2) - 2 : 1;
    std::size_t idx = 0;
    for (int z = 0; z < mz; ++z)
      for (int y = 0; y < my; ++y)
        for (int x = 0; x < mx; ++x)
          plans_->inverse_symbol[idx++] = 1.0 / (eigenvalue(x + 1, y + 1, d == 3 ? z + 1 : 0) * scale);
  } else {
    plans_->periodic = std::make_unique<PeriodicPlans>(domain);
    plans_->inverse_symbol.resize(plans_->periodic->complex_size);
    const double scale = static_cast<double>(domain.size());
    plans_->periodic->for_each_mode(domain, [&](std::size_t i, int x, int y, int z) {
      const double lam = eigenvalue(x, y, z);
      plans_->inverse_symbol[i] = (x == 0 && y == 0 && z == 0) ? 0.0 : 1.0 / (lam * scale);
    });
  }
}

PoissonSolver::~PoissonSolver() = default;

double PoissonSolver::eigenvalue(int kx, int ky, int kz) const {
  const int k[3] = {kx, ky, kz};
  double lam = 0;
  for (int a = 0; a < domain_.dim(); ++a) {
    const int n = domain_.extent(a);
    lam -= bc_ == BcMode::DirichletZero ? 4.0 * sin2(std::numbers::pi * k[a] / (2.0 * (n - 1)))
                                        : 4.0 * sin2(std::numbers::pi * k[a] / n);
  }
  return lam;
}

ScalarField PoissonSolver::solve(const ScalarField& rhs) const {
  require_same_domain(domain_, rhs.domain(), "poisson solve");
  if (!rhs.all_finite()) throw Error(ErrorCode::NonFiniteData, "poisson right-hand side is not finite");
  ScalarField out(domain_);
  if (bc_ == BcMode::DirichletZero) {
    const int mx = domain_.extent(0) - 2, my = domain_.extent(1) - 2;
    const int mz = domain_.dim() == 3 ? domain_.extent(2) - 2 : 1;
    const int z0 = domain_.dim() == 3 ? 1 : 0;
    FftwBuffer buf(plans_->interior_size);
    std::size_t idx = 0;
    for (int z = 0; z < mz; ++z)
      for (int y = 0; y < my; ++y)
        for (int x = 0; x < mx; ++x) buf.ptr[idx++] = rhs.at(x + 1, y + 1, z + z0);
    fftw_execute_r2r(plans_->dst, buf.ptr, buf.ptr);
    for (std::size_t i = 0; i < plans_->interior_size; ++i) buf.ptr[i] *= plans_->inverse_symbol[i];
    fftw_execute_r2r(plans_->dst, buf.ptr, buf.ptr);
    idx = 0;
    for (int z = 0; z < mz; ++z)
      for (int y = 0; y < my; ++y)
        for (int x = 0; x < mx; ++x) out.at(x + 1, y + 1, z + z0) = buf.ptr[idx++];
    return out;
  }
  const auto& pp = *plans_->periodic;
  FftwBuffer r(domain_.size());
  ComplexBuffer c(pp.complex_size);
  std::copy(rhs.values().begin(), rhs.values().end(), r.ptr);
  fftw_execute_dft_r2c(pp.forward, r.ptr, c.ptr);
  for (std::size_t i = 0; i < pp.complex_size; ++i) {
    c.ptr[i][0] *= plans_->inverse_symbol[i];
    c.ptr[i][1] *= plans_->inverse_symbol[i];
  }
  fftw_execute_dft_c2r(pp.backward, c.ptr, r.ptr);
  std::copy(r.ptr, r.ptr + domain_.size(), out.values().begin());
  return out;
}

VectorField PoissonSolver::solve(const VectorField& rhs) const {
  std::vector<ScalarField> comps;
  for (int c = 0; c < rhs.components(); ++c) comps.push_back(solve(rhs[c]));
  return VectorField(std::move(comps));
}

VectorField poisson_solve(const VectorField& rhs, BcMode bc) {
  return PoissonSolver(rhs.domain(), bc).solve(rhs);
}

// ---------------------------------------------------------------------------

namespace spectral {
namespace {

ScalarField spectral_partial(const PeriodicPlans& pp, const ScalarField& s, int axis) {
  const Domain& dom = s.domain();
  FftwBuffer r(dom.size());
  ComplexBuffer c(pp.complex_size);
  std::copy(s.values().begin(), s.values().end(), r.ptr);
  fftw_execute_dft_r2c(pp.forward, r.ptr, c.ptr);
  const double scale = 1.0 / static_cast<double>(dom.size());
  pp.for_each_mode(dom, [&](std::size_t i, int x, int y, int z) {
    const int k[3] = {x, y, z};
    const double w = periodic_wavenumber(k[axis], dom.extent(axis)) * scale;
    const double re = c.ptr[i][0], im = c.ptr[i][1];
    // multiply by i*w
    c.ptr[i][0] = -w * im;
    c.ptr[i][1] = w * re;
  });
  fftw_execute_dft_c2r(pp.backward, c.ptr, r.ptr);
  ScalarField out(dom);
  std::copy(r.ptr, r.ptr + dom.size(), out.values().begin());
  return out;
}

}  // namespace

VectorField gradient(const ScalarField& s) {
  const PeriodicPlans pp(s.domain());
  std::vector<ScalarField> comps;
  for (int a = 0; a < s.domain().dim(); ++a) comps.push_back(spectral_partial(pp, s, a));
  return VectorField(std::move(comps));
}

ScalarField divergence(const VectorField& v) {
  const PeriodicPlans pp(v.domain());
  ScalarField out = spectral_partial(pp, v[0], 0);
  for (int a = 1; a < v.domain().dim(); ++a) out += spectral_partial(pp, v[a], a);
  return out;
}

VectorField curl(const VectorField& v) {
  const PeriodicPlans pp(v.domain());
  auto p = [&](int comp, int axis) { return spectral_partial(pp, v[comp], axis); };
  if (v.domain().dim() == 2) return VectorField({p(1, 0) - p(0, 1)});
  return VectorField({p(2, 1) - p(1, 2), p(0, 2) - p(2, 0), p(1, 0) - p(0, 1)});
}

}  // namespace spectral
}  // namespace vpreg
