#include "vpreg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpreg/io.hpp"
#include "vpreg/phantom.hpp"
#include "vpreg/register.hpp"
#include "vpreg/resample.hpp"
#include "vpreg/svg.hpp"

namespace vpreg {
namespace {
namespace fs = std::filesystem;
using nlohmann::json;

std::mutex g_log_mutex;

struct Log {
  int verbosity = 1;  // 0 quiet, 1 normal, 2 verbose
  void operator()(int level, const std::string& line) const {
    if (level > verbosity) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::cerr << line << "\n";
  }
};

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

json deviation_json(const Deviation& d) { return {{"mean", d.mean}, {"max", d.max}}; }

json composition_json(const CompositionError& e) {
  return {{"max_det", e.max_det},   {"sum_det", e.sum_det},   {"sum_det_per_voxel", e.sum_det_per_voxel},
          {"max_norm", e.max_norm}, {"sum_norm", e.sum_norm}, {"sum_norm_per_voxel", e.sum_norm_per_voxel}};
}

// --- shared option groups --------------------------------------------------------

struct Common {
  std::string out;
  std::string dtype = "f32";
  int threads = 0;
  Dtype write_dtype() const { return dtype == "f64" ? Dtype::F64 : Dtype::F32; }
};

void add_common(CLI::App* sub, Common& c, bool threads) {
  sub->add_option("--out", c.out, "Output directory")->required();
  sub->add_option("--dtype", c.dtype, "Floating-point type of written volumes")
      ->check(CLI::IsMember({"f32", "f64"}));
  if (threads) sub->add_option("--threads", c.threads, "Worker threads (default: $VPREG_THREADS or 1)");
}

int resolve_threads(int flag) {
  int n = flag;
  if (n == 0) {
    if (const char* env = std::getenv("VPREG_THREADS")) {
      try {
        n = std::stoi(env);
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "VPREG_THREADS is not an integer");
      }
    } else {
      n = 1;
    }
  }
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "thread count must be >= 1");
  return n;
}

void add_grid_options(CLI::App* sub, GridGenOptions& g, const std::string& prefix) {
  sub->add_option("--" + prefix + "max-iters", g.max_iters, "Iteration limit");
  sub->add_option("--" + prefix + "tolerance", g.fit_tolerance, "Mean residual at which the fit stops (voxels)");
  sub->add_option("--" + prefix + "accept-tolerance", g.accept_tolerance,
                  "Largest mean residual accepted before reporting a stall (voxels)");
  sub->add_option("--" + prefix + "reg-weight", g.reg_weight, "Initial determinant/curl regularizer weight");
  const std::map<std::string, FitResidual> residuals{{"exact", FitResidual::Exact},
                                                     {"pullback", FitResidual::Pullback}};
  sub->add_option("--" + prefix + "residual", g.residual, "Fit residual form (exact|pullback)")
      ->transform(CLI::CheckedTransformer(residuals, CLI::ignore_case));
}

void add_reg_options(CLI::App* sub, RegOptions& o) {
  const std::map<std::string, Engine> engines{{"penalty", Engine::Penalty}, {"control", Engine::Control}};
  sub->add_option("--engine", o.engine, "Registration engine (penalty|control)")
      ->transform(CLI::CheckedTransformer(engines, CLI::ignore_case));
  const std::map<std::string, BcMode> bcs{{"dirichlet", BcMode::DirichletZero}, {"periodic", BcMode::Periodic}};
  sub->add_option("--bc", o.bc, "Boundary condition of the Poisson solves (dirichlet|periodic)")
      ->transform(CLI::CheckedTransformer(bcs, CLI::ignore_case));
  const std::map<std::string, ForceGradient> forces{{"warped", ForceGradient::WarpedImage},
                                                    {"interpolant", ForceGradient::Interpolant}};
  sub->add_option("--force-gradient", o.force, "Image gradient in the force term (warped|interpolant)")
      ->transform(CLI::CheckedTransformer(forces, CLI::ignore_case));
  sub->add_option("--tau0", o.stage1.tau0, "Initial homotopy parameter in (0, 1]");
  sub->add_option("--tau-growth", o.stage1.tau_growth, "Homotopy growth factor");
  sub->add_option("--stage1-iters", o.stage1.max_iters, "Stage-1 iteration limit");
  sub->add_option("--force-voxels", o.stage1.force_voxels, "Penalty stage-1 force scale (voxels)");
  sub->add_option("--stage1-step", o.stage1.step_voxels, "Control stage-1 first step (voxels)");
  sub->add_option("--stage2-iters", o.stage2.max_iters, "Stage-2 iteration limit");
  sub->add_option("--stage2-step", o.stage2.step_voxels, "Stage-2 first step (voxels)");
  sub->add_option("--patience", o.stage2.patience, "Stagnating accepts before stage 2 stops");
  sub->add_flag("!--no-stage2", o.run_stage2, "Skip the local stage");
  const std::map<std::string, ControlUpdate> updates{{"accumulate", ControlUpdate::Accumulate},
                                                     {"reset", ControlUpdate::Reset}};
  sub->add_option("--controls", o.stage2.update, "Control update after composition (accumulate|reset)")
      ->transform(CLI::CheckedTransformer(updates, CLI::ignore_case));
  sub->add_option("--bins", o.bins, "Histogram bins for mutual information");
  add_grid_options(sub, o.inverse, "inverse-");
}

void attach_progress(RegOptions& o, const Log& log, const std::string& tag) {
  if (log.verbosity == 0) return;
  o.progress = [log, tag](const RegTraceEntry& e) {
    const bool verbose = log.verbosity >= 2;
    if (!verbose && !(e.iter == 0 || (e.accepted && e.iter % 25 == 0))) return;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%sstage %d iter %d mse %.6g step %.4g min_jd %.4g solves %ld %s", tag.c_str(),
                  e.stage, e.iter, e.mse, e.step, e.min_jd, e.solves, e.accepted ? "accepted" : "rejected");
    log(1, buf);
  };
}

// --- register ----------------------------------------------------------------------

struct RegisterArgs {
  Common common;
  std::string moving, fixed, labels_moving, labels_fixed;
  RegOptions opts;
};

int cmd_register(RegisterArgs& a, const Log& log) {
  const ScalarField m = load_image(a.moving);
  const ScalarField f = load_image(a.fixed);
  std::optional<LabelVolume> lm, lf;
  if (!a.labels_moving.empty() != !a.labels_fixed.empty())
    throw Error(ErrorCode::InvalidArgument, "--labels-moving and --labels-fixed go together");
  if (!a.labels_moving.empty()) {
    lm = load_labels(a.labels_moving);
    lf = load_labels(a.labels_fixed);
  }
  attach_progress(a.opts, log, "register: ");
  const RegResult r = vpreg_pipeline(m, f, a.opts, lm ? &*lm : nullptr, lf ? &*lf : nullptr);
  const fs::path out(a.common.out);
  ensure_dir(out);
  const Dtype dt = a.common.write_dtype();
  write_volume(r.phi, join(out, "phi"), dt);
  write_volume(r.phi_inv, join(out, "phi_inv"), dt);
  write_volume(r.warped_moving, join(out, "warped_moving"), dt);
  write_volume(r.warped_fixed, join(out, "warped_fixed"), dt);
  write_text(join(out, "metrics.csv"), records_csv({r.metrics}));
  write_text(join(out, "metrics.json"), record_json(r.metrics));
  write_text(join(out, "trace.csv"), trace_csv(r.trace));
  std::ostringstream msg;
  msg << "register: done, " << r.solves << " Poisson solves, mse ratio " << r.metrics.mse_ratio.value_or(1.0)
      << ", min JD " << r.metrics.jd_min;
  log(1, msg.str());
  return kExitOk;
}

// --- invert ------------------------------------------------------------------------

struct InvertArgs {
  Common common;
  std::string map;
  GridGenOptions opts;
};

int cmd_invert(InvertArgs& a, const Log& log) {
  std::vector<std::string> warnings;
  const Transform phi = read_transform(a.map, &warnings);
  for (const auto& w : warnings) log(1, "warning: " + w);
  const LmResult r = invert_detailed(phi, a.opts);
  const InverseConsistency ic = inverse_consistency(phi, r.phi_m);
  const fs::path out(a.common.out);
  ensure_dir(out);
  write_volume(r.phi_m, join(out, "phi_inv"), a.common.write_dtype());
  json j;
  j["mean_residual"] = r.mean_residual;
  j["max_residual"] = r.max_residual;
  j["iterations"] = r.trace.empty() ? 0 : r.trace.back().iter;
  j["inv_after_fwd"] = composition_json(ic.inv_after_fwd);
  j["fwd_after_inv"] = composition_json(ic.fwd_after_inv);
  write_text(join(out, "inverse_report.json"), j.dump(2) + "\n");
  MetricRecord rec;
  const JdStats js = jd_stats(r.phi_m);
  rec.jd_min = js.min;
  rec.jd_max = js.max;
  rec.jd_neg_fraction = js.neg_fraction;
  rec.inverse = ic;
  write_text(join(out, "inverse_report.csv"), records_csv({rec}));
  std::ostringstream msg;
  msg << "invert: mean residual " << r.mean_residual << " voxels";
  log(1, msg.str());
  return kExitOk;
}

// --- gridgen -----------------------------------------------------------------------

struct GridgenArgs {
  Common common;
  std::string preset;
  std::vector<int> dims{64, 64};
  double amp = 1.0, width = 8.0, curl_amp = 0.05;
  unsigned seed = 1;
  std::string f_target, g_target;
  bool renormalize_targets = false;
  GridGenOptions opts;
};

int cmd_gridgen(GridgenArgs& a, const Log& log) {
  GridTargets t;
  if (!a.preset.empty()) {
    if (!a.f_target.empty()) throw Error(ErrorCode::InvalidArgument, "--preset and --f-target are exclusive");
    const Domain dom{std::span<const int>(a.dims)};
    if (a.preset == "uniform") t = identity_targets(dom);
    else if (a.preset == "radial-bump") t = phantom::radial_bump_targets(dom, a.amp, a.width);
    else t = phantom::random_targets(dom, a.seed, a.amp, a.curl_amp);
  } else if (!a.f_target.empty()) {
    t.f_t = load_image(a.f_target);
    const Domain& dom = t.f_t.domain();
    if (a.g_target.empty()) {
      t.g_t = VectorField(dom, curl_components(dom.dim()));
    } else if (dom.dim() == 2) {
      t.g_t = VectorField(std::vector<ScalarField>{load_image(a.g_target)});
    } else {
      const Volume v = read_volume(a.g_target);
      if (!std::holds_alternative<VectorField>(v)) throw Error(ErrorCode::InvalidArgument, "3-D curl target must be a vector volume");
      t.g_t = std::get<VectorField>(v);
    }
    require_same_domain(dom, t.g_t.domain(), "gridgen targets");
    if (a.renormalize_targets) t = renormalize(std::move(t));
  } else {
    throw Error(ErrorCode::InvalidArgument, "give --preset or --f-target");
  }
  const GridGenResult r = vp_generate(make_identity(t.f_t.domain()), t, a.opts);
  const GridResidual res = grid_residual(r.phi, t);
  const fs::path out(a.common.out);
  ensure_dir(out);
  write_volume(r.phi, join(out, "phi"), a.common.write_dtype());
  json j;
  j["preset"] = a.preset.empty() ? "file" : a.preset;
  j["iterations"] = r.trace.back().iter;
  j["objective"] = r.objective;
  j["jd_rel_l2"] = res.jd_rel_l2;
  j["jd_rel_l2_all_voxels"] = res.jd_rel_l2_all;
  j["curl_l2"] = res.curl_l2;
  j["min_jd"] = res.min_jd;
  j["max_jd"] = res.max_jd;
  j["diffeomorphic"] = is_diffeomorphic(r.phi);
  write_text(join(out, "gridgen_report.json"), j.dump(2) + "\n");
  std::ostringstream msg;
  msg << "gridgen: JD residual " << res.jd_rel_l2 << " (relative L2), curl residual " << res.curl_l2;
  log(1, msg.str());
  return kExitOk;
}

// --- metrics -----------------------------------------------------------------------

struct MetricsArgs {
  Common common;
  std::string moving, fixed, phi, phi_inv, labels_moving, labels_fixed;
  int bins = 64;
};

int cmd_metrics(MetricsArgs& a, const Log& log) {
  std::vector<std::string> warnings;
  const Transform phi = read_transform(a.phi, &warnings);
  std::optional<Transform> phi_inv;
  if (!a.phi_inv.empty()) phi_inv = read_transform(a.phi_inv, &warnings);
  else warnings.push_back("no inverse given; inverse-consistency columns left empty");
  std::optional<ScalarField> m, f;
  if (!a.moving.empty() != !a.fixed.empty()) throw Error(ErrorCode::InvalidArgument, "--moving and --fixed go together");
  if (!a.moving.empty()) {
    m = load_image(a.moving);
    f = load_image(a.fixed);
  }
  std::optional<LabelVolume> lm, lf;
  if (!a.labels_moving.empty() != !a.labels_fixed.empty())
    throw Error(ErrorCode::InvalidArgument, "--labels-moving and --labels-fixed go together");
  if (!a.labels_moving.empty()) {
    lm = load_labels(a.labels_moving);
    lf = load_labels(a.labels_fixed);
  }
  for (const auto& w : warnings) log(1, "warning: " + w);
  MetricInputs in;
  in.phi = &phi;
  in.phi_inv = phi_inv ? &*phi_inv : nullptr;
  in.moving = m ? &*m : nullptr;
  in.fixed = f ? &*f : nullptr;
  in.labels_moving = lm ? &*lm : nullptr;
  in.labels_fixed = lf ? &*lf : nullptr;
  in.bins = a.bins;
  // every input must share phi's lattice
  if (m) require_same_domain(m->domain(), phi.domain(), "metrics inputs");
  if (f) require_same_domain(f->domain(), phi.domain(), "metrics inputs");
  if (lm) require_same_domain(lm->domain(), phi.domain(), "metrics labels");
  if (lf) require_same_domain(lf->domain(), phi.domain(), "metrics labels");
  const MetricRecord rec = compute_metrics(in);
  const fs::path out(a.common.out);
  ensure_dir(out);
  write_text(join(out, "metrics.csv"), records_csv({rec}));
  write_text(join(out, "metrics.json"), record_json(rec));
  return kExitOk;
}

// --- cohort ------------------------------------------------------------------------

struct CohortArgs {
  Common common;
  std::string manifest;
  RegOptions opts;
};

struct ManifestRow {
  std::string moving, fixed, labels_moving, labels_fixed;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<ManifestRow> parse_manifest(const std::string& path) {
  std::istringstream in(read_text(path));
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  std::vector<ManifestRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(trim(c));
    if (cells[0] == "moving") continue;
    if (cells.size() < 2 || cells.size() > 4 || cells.size() == 3)
      throw Error(ErrorCode::InvalidArgument, "manifest line " + std::to_string(lineno) +
                                                  ": expected moving,fixed[,labels_moving,labels_fixed]");
    ManifestRow r{resolve(cells[0]), resolve(cells[1]), "", ""};
    if (cells.size() == 4) {
      r.labels_moving = resolve(cells[2]);
      r.labels_fixed = resolve(cells[3]);
    }
    rows.push_back(r);
  }
  return rows;
}

int cmd_cohort(CohortArgs& a, const Log& log) {
  const int threads = resolve_threads(a.common.threads);
  const auto rows = parse_manifest(a.manifest);
  if (rows.empty()) throw Error(ErrorCode::EmptyCohort, "manifest lists no pairs");
  const std::size_t n = rows.size();
  std::vector<std::optional<MetricRecord>> records(n);
  std::vector<std::string> failures(n);
  std::vector<int> codes(n, kExitOk);
  const fs::path out(a.common.out);
  ensure_dir(out / "pairs");
  auto id_of = [](std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair_%03zu", k);
    return std::string(buf);
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < n; k = next++) {
      const auto& row = rows[k];
      const std::string id = id_of(k);
      try {
        const ScalarField m = load_image(row.moving);
        const ScalarField f = load_image(row.fixed);
        std::optional<LabelVolume> lm, lf;
        if (!row.labels_moving.empty()) {
          lm = load_labels(row.labels_moving);
          lf = load_labels(row.labels_fixed);
        }
        RegOptions opts = a.opts;
        opts.progress = nullptr;
        const RegResult r = vpreg_pipeline(m, f, opts, lm ? &*lm : nullptr, lf ? &*lf : nullptr);
        write_text(join(out / "pairs", id + ".json"), record_json(r.metrics));
        write_text(join(out / "pairs", id + "_trace.csv"), trace_csv(r.trace));
        records[k] = r.metrics;
        log(1, "cohort: " + id + " done");
      } catch (const Error& e) {
        failures[k] = e.what();
        codes[k] = is_numerical_failure(e.code()) ? kExitNumerical : kExitInvalid;
        log(1, "cohort: " + id + " failed: " + e.what());
      } catch (const std::exception& e) {
        failures[k] = e.what();
        codes[k] = kExitInvalid;
        log(1, "cohort: " + id + " failed: " + e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < std::min<int>(threads, static_cast<int>(n)); ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<MetricRecord> ok;
  std::vector<std::string> ids;
  std::ostringstream fail_csv;
  fail_csv << "id,exit_code,message\n";
  int exit_code = kExitOk;
  for (std::size_t k = 0; k < n; ++k) {
    if (records[k]) {
      ok.push_back(*records[k]);
      ids.push_back(id_of(k));
    } else {
      std::string msg = failures[k];
      std::replace(msg.begin(), msg.end(), ',', ';');
      fail_csv << id_of(k) << "," << codes[k] << "," << msg << "\n";
      exit_code = std::max(exit_code, codes[k]);
    }
  }
  write_text(join(out, "metrics.csv"), records_csv(ok, ids));
  write_text(join(out, "failures.csv"), fail_csv.str());
  if (!ok.empty()) {
    const CohortSummary s = cohort_summary(ok);
    write_text(join(out, "summary.csv"), summary_csv(s));
    write_text(join(out, "summary.json"), summary_json(s));
  }
  return exit_code;
}

// --- demo-consistency ----------------------------------------------------------------

struct DemoArgs {
  Common common;
  unsigned seed = 7;
  int size = 64;
  double amp = 3.0;
  GridGenOptions opts;
};

int cmd_demo(DemoArgs& a, const Log& log) {
  const Domain dom{a.size, a.size};
  const Transform pa = phantom::smooth_map(dom, a.amp, a.seed);
  const Transform pb = phantom::smooth_map(dom, a.amp, a.seed + 1);
  const Transform pc = phantom::smooth_map(dom, a.amp, a.seed + 2);
  for (const Transform* p : {&pa, &pb, &pc})
    if (!is_diffeomorphic(*p)) throw Error(ErrorCode::InvalidArgument, "demo amplitude folds the synthetic grids");
  auto map_between = [&](const Transform& from, const Transform& to, const char* name) {
    LmResult r = lm_target_grid(from, to, a.opts);
    std::ostringstream msg;
    msg << "demo-consistency: " << name << " mean residual " << r.mean_residual;
    log(1, msg.str());
    return r.phi_m;
  };
  const Transform ab = map_between(pa, pb, "phi_ab");
  const Transform ba = map_between(pb, pa, "phi_ba");
  const Transform ac = map_between(pa, pc, "phi_ac");
  const Transform cb = map_between(pc, pb, "phi_cb");
  const ConsistencyReport rep = consistency_report(ab, ba, ac, cb);
  const fs::path out(a.common.out);
  ensure_dir(out);
  json j;
  j["seed"] = a.seed;
  j["size"] = a.size;
  j["amplitude"] = a.amp;
  j["ba_after_ab"] = deviation_json(rep.ba_after_ab);
  j["ab_after_ba"] = deviation_json(rep.ab_after_ba);
  j["transitivity"] = deviation_json(rep.transitivity);
  j["ab_fit"] = deviation_json(map_deviation(compose(ab, pa), pb));
  write_text(join(out, "consistency_report.json"), j.dump(2) + "\n");

  const Transform id = make_identity(dom);
  const Transform ab_a = compose(ab, pa), ba_ab = compose(ba, ab), ab_ba = compose(ab, ba), cb_ac = compose(cb, ac);
  auto svg = [&](const std::string& name, const Transform& black, const Transform* red) {
    std::vector<GridLayer> layers{{&black, "black", 1.0}};
    if (red) layers.push_back({red, "red", 1.0});
    write_text(join(out, name), grid_svg(layers));
  };
  svg("a.svg", pa, nullptr);
  svg("b.svg", pb, nullptr);
  svg("c.svg", pc, nullptr);
  svg("ab.svg", ab, nullptr);
  svg("ba.svg", ba, nullptr);
  svg("ab_of_a_vs_b.svg", pb, &ab_a);
  svg("ba_of_ab_vs_id.svg", id, &ba_ab);
  svg("ab_of_ba_vs_id.svg", id, &ab_ba);
  svg("cb_of_ac_vs_ab.svg", ab, &cb_ac);
  std::ostringstream msg;
  msg << "demo-consistency: inverse consistency " << rep.ba_after_ab.mean << " / " << rep.ab_after_ba.mean
      << ", transitivity " << rep.transitivity.mean << " (mean voxels)";
  log(1, msg.str());
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Diffeomorphic registration, grid generation and evaluation", "vpreg"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with one [<subcommand>] section of options; flags take precedence");
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Report every trial step");
  app.add_flag("-q,--quiet", quiet, "No progress output");

  RegisterArgs reg;
  auto* s_reg = app.add_subcommand("register", "Register a moving image to a fixed image");
  add_common(s_reg, reg.common, false);
  s_reg->add_option("--moving", reg.moving, "Moving image (.vpv.json or .nii[.gz])")->required();
  s_reg->add_option("--fixed", reg.fixed, "Fixed image")->required();
  s_reg->add_option("--labels-moving", reg.labels_moving, "Moving segmentation");
  s_reg->add_option("--labels-fixed", reg.labels_fixed, "Fixed segmentation");
  add_reg_options(s_reg, reg.opts);

  InvertArgs inv;
  auto* s_inv = app.add_subcommand("invert", "Invert a transform");
  add_common(s_inv, inv.common, false);
  s_inv->add_option("--map", inv.map, "Transform to invert")->required();
  add_grid_options(s_inv, inv.opts, "");

  GridgenArgs gg;
  auto* s_gg = app.add_subcommand("gridgen", "Generate a grid with prescribed Jacobian determinant and curl");
  add_common(s_gg, gg.common, false);
  s_gg->add_option("--preset", gg.preset, "Synthetic targets")
      ->check(CLI::IsMember({"uniform", "radial-bump", "random"}));
  s_gg->add_option("--dims", gg.dims, "Lattice extents for presets")->delimiter(',')->expected(2, 3);
  s_gg->add_option("--amp", gg.amp, "Preset JD amplitude");
  s_gg->add_option("--width", gg.width, "Radial bump width (voxels)");
  s_gg->add_option("--curl-amp", gg.curl_amp, "Random preset curl amplitude");
  s_gg->add_option("--seed", gg.seed, "Random preset seed");
  s_gg->add_option("--f-target", gg.f_target, "Jacobian determinant target volume");
  s_gg->add_option("--g-target", gg.g_target, "Curl target volume");
  s_gg->add_flag("--renormalize", gg.renormalize_targets, "Rescale f_t to mean 1");
  s_gg->add_option("--max-iters", gg.opts.max_iters, "Iteration limit");
  s_gg->add_option("--step-voxels", gg.opts.step_voxels, "First step size (voxels)");

  MetricsArgs met;
  auto* s_met = app.add_subcommand("metrics", "Evaluate a transform");
  add_common(s_met, met.common, false);
  s_met->add_option("--phi", met.phi, "Forward transform")->required();
  s_met->add_option("--phi-inv", met.phi_inv, "Inverse transform");
  s_met->add_option("--moving", met.moving, "Moving image");
  s_met->add_option("--fixed", met.fixed, "Fixed image");
  s_met->add_option("--labels-moving", met.labels_moving, "Moving segmentation");
  s_met->add_option("--labels-fixed", met.labels_fixed, "Fixed segmentation");
  s_met->add_option("--bins", met.bins, "Histogram bins for mutual information");

  CohortArgs coh;
  auto* s_coh = app.add_subcommand("cohort", "Register every pair of a manifest");
  add_common(s_coh, coh.common, true);
  s_coh->add_option("--manifest", coh.manifest, "CSV: moving,fixed[,labels_moving,labels_fixed]")->required();
  add_reg_options(s_coh, coh.opts);

  DemoArgs demo;
  auto* s_demo = app.add_subcommand("demo-consistency", "Inverse consistency and transitivity on synthetic grids");
  add_common(s_demo, demo.common, true);
  s_demo->add_option("--seed", demo.seed, "Seed of the synthetic grids");
  s_demo->add_option("--size", demo.size, "Lattice extent");
  s_demo->add_option("--amp", demo.amp, "Displacement amplitude of the synthetic grids (voxels)");
  add_grid_options(s_demo, demo.opts, "");

  // --config belongs to the root app; accept it anywhere on the line
  std::vector<std::string> front, rest;
  for (std::size_t k = 1; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      front = {args[k], args[k + 1]};
      ++k;
    } else if (args[k].rfind("--config=", 0) == 0) {
      front = {args[k]};
    } else {
      rest.push_back(args[k]);
    }
  }
  rest.insert(rest.begin(), front.begin(), front.end());
  std::vector<std::string> rev(rest.rbegin(), rest.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }
  Log log;
  log.verbosity = quiet ? 0 : verbose > 0 ? 2 : 1;
  try {
    if (*s_reg) return cmd_register(reg, log);
    if (*s_inv) return cmd_invert(inv, log);
    if (*s_gg) return cmd_gridgen(gg, log);
    if (*s_met) return cmd_metrics(met, log);
    if (*s_coh) return cmd_cohort(coh, log);
    if (*s_demo) {
      resolve_threads(demo.common.threads);
      return cmd_demo(demo, log);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical_failure(e.code()) ? kExitNumerical : kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

int run_cli(int argc, char** argv) { return run_cli(std::vector<std::string>(argv, argv + argc)); }

}  // namespace vpreg
